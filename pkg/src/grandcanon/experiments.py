"""Verification campaigns run by the command-line tool.

Each experiment writes its CSV files into the output directory and returns a
list of :class:`Check` records. Output never contains timings or anything
else that varies between runs with the same seed.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from grandcanon import dynamics, effective, fock, geometry, states, stvr
from grandcanon._linalg import max_abs, random_hermitian
from grandcanon.seeding import derive_seed, generator


@dataclass(frozen=True)
class Check:
    anchor: str
    name: str
    measured: float
    bound: str
    status: str  # PASS, FAIL or INFO

    def line(self):
        return f"{self.anchor} {self.name} measured={_fmt(self.measured)} bound={self.bound} {self.status}"


def _fmt(x):
    return f"{x:.6e}" if isinstance(x, float) else str(x)


def _le(anchor, name, measured, bound):
    """Check ``measured <= bound``."""
    ok = bool(measured <= bound)
    return Check(anchor, name, float(measured), _fmt(float(bound)), "PASS" if ok else "FAIL")


def _ge(anchor, name, measured, bound):
    ok = bool(measured >= bound)
    return Check(anchor, name, float(measured), f">={_fmt(float(bound))}", "PASS" if ok else "FAIL")


def _info(anchor, name, measured):
    return Check(anchor, name, float(measured), "none", "INFO")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


class Context:
    def __init__(self, cfg, out_dir, workers=1):
        self.cfg = cfg
        self.out_dir = out_dir
        self.workers = max(1, int(workers))

    def seed(self, experiment, *labels):
        return derive_seed(self.cfg.master_seed, experiment, *labels)

    def path(self, name):
        return os.path.join(self.out_dir, name)


# ---------------------------------------------------------------------------


def geometry_verify(ctx):
    g = ctx.cfg["geometry"]
    checks = []
    ball = geometry.Ball(np.zeros(3), g["radius"])

    rows = []
    for delta in g["deltas"]:
        spec = geometry.CorridorSpec(ball, delta)
        est = geometry.mc_corridor_volume(
            spec, geometry.default_bounding(spec), g["samples"],
            ctx.seed("geometry-verify", "ball-corridor", delta), workers=ctx.workers,
        )
        exact = geometry.ball_corridor_volume(g["radius"], delta, 3)
        z = abs(est.mean - exact) / est.stderr
        rel = abs(est.mean - exact) / exact
        rows.append((delta, est.mean, est.stderr, exact, z, rel))
        checks.append(_le("ball-corridor-closed-form", f"mc-sigma-delta={delta}", z, 4.0))
        checks.append(_le("ball-corridor-closed-form", f"mc-relative-delta={delta}", rel, 0.01))
    _write_rows(ctx.path("corridor_oracle.csv"),
                ["delta", "mc_mean", "mc_stderr", "exact", "abs_z", "rel_err"], rows)

    poly = geometry.random_polytope(3, g["polytope_facets"], ctx.seed("geometry-verify", "polytope"))
    bodies = [
        ("ball", ball),
        ("box", geometry.Box.cube(3, g["box_side"])),
        ("polytope", poly),
    ]
    reports = []
    for body_id, body in bodies:
        r_in = geometry.inradius(body)
        for k in range(1, g["bound_points"] + 1):
            delta = g["bound_fraction"] * r_in * k / g["bound_points"]
            spec = geometry.CorridorSpec(body, delta)
            est = geometry.mc_corridor_volume(
                spec, geometry.default_bounding(spec), g["bound_samples"],
                ctx.seed("geometry-verify", "bounds", body_id, k), workers=ctx.workers,
            )
            reports.append(geometry.check_volume_bounds(spec, est, body_id))
    geometry.write_bound_reports_csv(ctx.path("volume_bounds.csv"), reports)
    for body_id, _ in bodies:
        mine = [r for r in reports if r.body_id == body_id]
        ok = all(r.passed and r.exact_passed is not False for r in mine)
        # Highest position inside the band, 0 at the lower bound and 1 at the upper.
        frac = max(
            ((r.exact if r.exact is not None else r.mc_mean) - r.lower_bound) / (r.upper_bound - r.lower_bound)
            for r in mine
        )
        checks.append(Check("corridor-volume-bounds", f"{body_id}-band-position", float(frac),
                            "[0,1]" if ok else "violated", "PASS" if ok else "FAIL"))

    cube = geometry.Box.cube(3, g["box_side"])
    eps = g["steiner_eps"]
    exact = geometry.steiner_outer_volume(cube, eps)
    est = geometry.mc_outer_shell_volume(cube, eps, g["samples"], ctx.seed("geometry-verify", "steiner"),
                                         workers=ctx.workers)
    z = abs(est.mean - exact) / est.stderr
    _write_rows(ctx.path("steiner.csv"), ["eps", "steiner", "mc_mean", "mc_stderr", "abs_z"],
                [(eps, exact, est.mean, est.stderr, z)])
    checks.append(_le("steiner-cube-shell", "mc-sigma", z, 3.0))
    return checks


def stvr_scan(ctx):
    s = ctx.cfg["stvr"]
    scenario = stvr.StvrScenario.around(
        geometry.Ball(np.zeros(3), s["radius"]), s["clearance"],
        density=s["density"], delta_S=s["delta_S"], v0=s["v0"], w0=s["w0"],
        seed=ctx.seed("stvr-scan", "trials"),
    )
    rep = stvr.ratio_scan(scenario, s["deltas"], trials=s["trials"], workers=ctx.workers)
    rep.write_csv(ctx.path("stvr.csv"))
    _write_rows(
        ctx.path("stvr_envelope.csv"),
        ["delta", "corridor_volume", "corridor_density", "corridor_density_stderr", "e_int_min", "e_int_max",
         "e_s_min", "e_s_max", "c1", "c2", "corridor_violations"],
        [(r.delta, r.corridor_volume, r.corridor_density, r.corridor_density_stderr, r.e_int_min, r.e_int_max,
          r.e_s_min, r.e_s_max, r.c1, r.c2, r.corridor_violations) for r in rep.rows],
    )
    checks = [_le("corridor-containment", "violations", float(rep.corridor_violations), 0.0)]
    for r in rep.rows:
        dev = abs(r.corridor_density - s["density"]) / r.corridor_density_stderr
        checks.append(_le("corridor-density", f"sigma-delta={r.delta}", dev, 3.0))
    for r in rep.rows:
        checks.append(Check("energy-ratio-envelope", f"delta={r.delta}", r.ratio,
                            f"[{_fmt(r.envelope_lower)},{_fmt(r.envelope_upper)}]+-3sigma",
                            "PASS" if r.passed else "FAIL"))
    if rep.fit is None:
        checks.append(Check("energy-ratio-exponent", "raw", float("nan"), f">={s['min_exponent']}", "FAIL"))
    else:
        checks.append(_ge("energy-ratio-exponent", "raw", rep.fit.exponent, s["min_exponent"]))
        checks.append(_info("energy-ratio-exponent", "squared-corridor-fraction", rep.fraction_fit.exponent))
        checks.append(_info("energy-ratio-exponent", "pair-coefficient", rep.coefficient_fit.exponent))
    return checks


def fock_check(ctx):
    checks, rows = [], []
    rng = generator(ctx.seed("fock-check", "generators"))
    worst_id, worst_comm = 0.0, 0.0
    spectrum_ok = True
    for d, m in ctx.cfg["fock"]["cases"]:
        h = random_hermitian(d, rng)
        w = random_hermitian(d * d, rng).reshape(d, d, d, d)
        w = ((w + w.transpose(1, 0, 3, 2)) / 2).reshape(d * d, d * d)
        for stat in fock.STATISTICS:
            spec = fock.FockSpaceSpec(d, m, stat)
            ident = fock.verify_direct_sum(spec)
            worst_id = max(worst_id, ident.max_deviation)
            N = fock.number_operator(spec)
            evals = N.eigvalsh()
            expected = np.repeat(np.arange(m + 1), spec.sector_dims).astype(float)
            spectrum_ok &= bool(np.array_equal(evals, expected))
            H = fock.direct_sum_hamiltonian(h, w, spec).to_dense()
            Nd = N.to_dense()
            comm = max_abs(H @ Nd - Nd @ H)
            worst_comm = max(worst_comm, comm)
            rows.append((d, m, stat, spec.total_dim, " ".join(map(str, spec.sector_dims)),
                         ident.orthogonality, ident.completeness, comm))
    _write_rows(ctx.path("fock.csv"),
                ["d", "M", "statistics", "total_dim", "sector_dims", "orthogonality", "completeness",
                 "commutator"], rows)
    checks.append(_le("fock-direct-sum", "embedding-identities", worst_id, 1e-12))
    checks.append(Check("number-spectrum", "eigenvalues-with-multiplicity", 0.0 if spectrum_ok else 1.0,
                        "exact", "PASS" if spectrum_ok else "FAIL"))
    checks.append(_le("number-commutation", "hamiltonian-number", worst_comm, 1e-14))
    return checks


def states_check(ctx):
    c = ctx.cfg["states"]
    split = states.ProductSplit(c["dim_S"], c["dim_R"])
    rows = []
    pt_worst = add_worst = rep_worst = 0.0
    for k in range(c["instances"]):
        rng = generator(ctx.seed("states-check", "instance", k))
        rank = int(rng.integers(1, split.dim + 1))
        rho = states.random_density(split.dim, rank, ctx.seed("states-check", "rho", k))
        T_S = random_hermitian(split.dim_S, rng)
        pt = states.check_partial_trace_formula(T_S, rho, split)
        Ts = [random_hermitian(split.dim, rng) for _ in range(3)]
        add = states.check_additivity(Ts, rho)
        rep = states.representation_independence_check(rho, Ts[0], 1, ctx.seed("states-check", "rot", k))
        rows.append((k, rank, pt, add, rep))
        pt_worst, add_worst, rep_worst = max(pt_worst, pt), max(add_worst, add), max(rep_worst, rep)
    mixed = states.DensityOperator.maximally_mixed(split.dim)
    T = random_hermitian(split.dim, generator(ctx.seed("states-check", "mixed-observable")))
    mixed_dev = states.representation_independence_check(mixed, T, c["rotations"],
                                                         ctx.seed("states-check", "mixed-rotations"))
    rows.append(("maximally-mixed", split.dim, float("nan"), float("nan"), mixed_dev))
    _write_rows(ctx.path("states.csv"),
                ["instance", "rank", "partial_trace_dev", "additivity_dev", "representation_dev"], rows)
    return [
        _le("partial-trace-formula", "spectral-both-sides", pt_worst, 1e-10),
        _le("expectation-additivity", "random-instances", add_worst, 1e-11),
        _le("representation-independence", "random-instances", rep_worst, 1e-11),
        _le("representation-independence", "maximally-mixed-rotations", mixed_dev, 1e-11),
    ]


def mu_scan(ctx):
    e = ctx.cfg["effective"]
    a, b, N = e["a"], e["b"], e["N_total"]
    quad = effective.QuadraticCurve(a, b)
    checks = []
    mu = effective.chemical_potential(quad, N)
    checks.append(_le("chemical-potential", "quadratic-central-difference", abs(mu - (a + 2 * b * N)), 0.0))
    rem_dev = max(abs(effective.taylor_remainder(quad, N, n) - b * n * n) for n in range(0, 1001, 37))
    checks.append(_le("taylor-remainder", "quadratic-closed-form", rem_dev, 1e-12))

    n_values = np.unique(np.round(np.geomspace(e["eps_min"] * N, e["eps_max"] * N, e["points"])).astype(int))
    n_values = n_values[n_values >= 1]
    spec = fock.FockSpaceSpec(1, int(n_values[-1]))
    H = fock.direct_sum_hamiltonian(np.array([[0.5]]), np.array([[0.25]]), spec)
    Nop = fock.number_operator(spec)
    sector_states = [effective.sector_state(spec, int(n)) for n in n_values]

    scan = effective.residual_scan(H, Nop, quad, N, sector_states)
    scan.write_csv(ctx.path("mu_scan.csv"))
    with open(ctx.path("mu_summary.txt"), "w") as fh:
        fh.write(scan.summary())
    slope = scan.slope if scan.slope is not None else float("nan")
    checks.append(Check("effective-residual-slope", "quadratic", float(slope), "2.0+-0.2",
                        "PASS" if abs(slope - 2.0) <= 0.2 else "FAIL"))
    closed = max(abs(r.residual - b * round(r.epsilon * N) ** 2) for r in scan.rows)
    checks.append(_le("effective-residual-slope", "quadratic-closed-form", closed, 1e-12 * max(1.0, b * N * N)))

    lin = effective.residual_scan(H, Nop, effective.LinearCurve(a), N, sector_states)
    lin_max = max(r.residual for r in lin.rows)
    checks.append(_le("effective-residual-slope", "linear-zero", lin_max, 0.0))

    shifted = effective.residual_scan(H, Nop, quad.shifted(123.0), N, sector_states)
    shift_dev = max(abs(p.residual - q.residual) for p, q in zip(scan.rows, shifted.rows))
    checks.append(_le("reservoir-shift-covariance", "residual-change", shift_dev, 1e-9))

    small = fock.FockSpaceSpec(2, 3)
    rng = generator(ctx.seed("mu-scan", "gibbs"))
    h = random_hermitian(2, rng)
    w = random_hermitian(4, rng).reshape(2, 2, 2, 2)
    w = ((w + w.transpose(1, 0, 3, 2)) / 2).reshape(4, 4)
    Hs = fock.direct_sum_hamiltonian(h, w, small)
    Ns = fock.number_operator(small)
    g0 = dynamics.grand_canonical_state(Hs, Ns, mu=0.3, beta=1.0)
    g1 = dynamics.grand_canonical_state(Hs.shifted(7.5), Ns, mu=0.3, beta=1.0)
    checks.append(_le("gibbs-shift-invariance", "state-change", max_abs(g0.matrix - g1.matrix), 1e-12))
    return checks


def _random_fock_hamiltonian(spec, rng):
    d = spec.single_particle_dim
    h = random_hermitian(d, rng)
    w = random_hermitian(d * d, rng).reshape(d, d, d, d)
    w = ((w + w.transpose(1, 0, 3, 2)) / 2).reshape(d * d, d * d)
    return fock.direct_sum_hamiltonian(h, w, spec)


def gc_evolve(ctx):
    c = ctx.cfg["dynamics"]
    spec = fock.FockSpaceSpec(c["single_particle_dim"], c["max_sector"])
    rng = generator(ctx.seed("gc-evolve", "hamiltonian"))
    H = _random_fock_hamiltonian(spec, rng)
    N = fock.number_operator(spec)
    H_eff = fock.effective_hamiltonian(H, N, c["mu"]).to_dense()
    exact_cfg = dynamics.PropagatorConfig("exact", c["dt"], c["t_final"])
    checks = []

    gc = dynamics.grand_canonical_state(H, N, c["mu"], c["beta"])
    checks.append(_le("gc-stationarity", "commutator", dynamics.stationarity_check(gc, H_eff), 1e-12))
    traj = dynamics.evolve(gc, H_eff, exact_cfg)
    traj.write_csv(ctx.path("gc_trajectory.csv"))
    checks.append(_le("gc-stationarity", "evolution-drift", traj.max_drift(), 1e-10))

    dim = spec.total_dim
    tr_dev = pur_dev = en_dev = 0.0
    min_eig = np.inf
    rk_tr = 0.0
    rk_cfg = dynamics.PropagatorConfig("rk4", c["rk4_dt"], min(1.0, c["t_final"]))
    for k in range(c["instances"]):
        rho0 = states.random_density(dim, dim, ctx.seed("gc-evolve", "initial", k))
        diag = np.array(dynamics.evolve(rho0, H_eff, exact_cfg).diagnostics())
        if k == 0:
            _write_rows(ctx.path("random_trajectory.csv"),
                        ["t", "trace", "purity", "energy", "min_eig", "commutator_norm"],
                        [tuple(float(x) for x in row) for row in diag])
        tr_dev = max(tr_dev, float(np.max(np.abs(diag[:, 1] - 1.0))))
        pur_dev = max(pur_dev, float(np.max(np.abs(diag[:, 2] - diag[0, 2]))))
        en_dev = max(en_dev, float(np.max(np.abs(diag[:, 3] - diag[0, 3]))))
        min_eig = min(min_eig, float(np.min(diag[:, 4])))
        rk = dynamics.evolve(rho0, H_eff, _guarded(rk_cfg, H_eff))
        rk_tr = max(rk_tr, max(abs(np.trace(m).real - 1.0) for m in rk.matrices))
    checks += [
        _le("trace-conservation", "exact", tr_dev, 1e-12),
        _le("trace-conservation", "rk4", rk_tr, 1e-8),
        _le("purity-conservation", "exact", pur_dev, 1e-10),
        _le("energy-conservation", "exact", en_dev, 1e-10),
        _ge("positivity", "min-eigenvalue", min_eig, -1e-8),
    ]

    fc_worst = 0.0
    for k in range(c["instances"]):
        frng = generator(ctx.seed("gc-evolve", "functional-calculus", k))
        dim_S = int(frng.integers(2, 17))
        dim_R = int(frng.integers(1, 256 // dim_S + 1))
        T = random_hermitian(dim_S, frng)
        T /= np.linalg.norm(T, 2)
        for f in (np.exp, lambda x: np.exp(-c["beta"] * x), dynamics.spectral_truncation(0.5)):
            fc_worst = max(fc_worst, dynamics.check_tensor_functional_calculus(T, dim_R, f))
    checks.append(_le("tensor-functional-calculus", "exp-gibbs-truncation", fc_worst, 1e-12))

    bm_rng = generator(ctx.seed("gc-evolve", "born-markov"))
    dim_R = 3
    rho1 = states.random_density(dim, dim, ctx.seed("gc-evolve", "bm-rho1"))
    bm_cfg = dynamics.PropagatorConfig("exact", c["dt"], min(2.0, c["t_final"]))
    worst = 0.0
    for rank in (1, dim_R):
        rho2 = states.random_density(dim_R, rank, ctx.seed("gc-evolve", "bm-rho2", rank))
        worst = max(worst, dynamics.born_markov_compare(rho1, rho2, H_eff, bm_cfg))
    checks.append(_le("born-markov-factorization", "uncoupled", worst, 1e-11))
    A = random_hermitian(dim, bm_rng)
    B = random_hermitian(dim_R, bm_rng)
    rho2 = states.random_density(dim_R, dim_R, ctx.seed("gc-evolve", "bm-rho2", dim_R))
    coupled = dynamics.born_markov_compare(rho1, rho2, H_eff, bm_cfg, coupling=c["coupling"] * np.kron(A, B))
    checks.append(_info("born-markov-factorization", f"coupled-g={c['coupling']}", coupled))
    return checks


def _guarded(cfg, H):
    """Shrink the rk4 step if needed so the stability guard holds."""
    limit = dynamics.RK4_GUARD / np.linalg.norm(H, 2)
    if cfg.dt <= limit:
        return cfg
    n = int(np.ceil(cfg.t_final / limit))
    return dynamics.PropagatorConfig("rk4", cfg.t_final / n, cfg.t_final, cfg.hbar)


EXPERIMENTS = {
    "geometry-verify": geometry_verify,
    "stvr-scan": stvr_scan,
    "fock-check": fock_check,
    "states-check": states_check,
    "mu-scan": mu_scan,
    "gc-evolve": gc_evolve,
}


def run_experiment(cfg, out_dir, workers=1):
    os.makedirs(out_dir, exist_ok=True)
    ctx = Context(cfg, out_dir, workers)
    names = list(EXPERIMENTS) if cfg.experiment == "full-suite" else [cfg.experiment]
    checks = []
    for name in names:
        checks.extend(EXPERIMENTS[name](ctx))
    with open(ctx.path("report.txt"), "w") as fh:
        fh.write(f"# experiment={cfg.experiment} master_seed={cfg.master_seed}\n")
        for chk in checks:
            fh.write(chk.line() + "\n")
    return checks
