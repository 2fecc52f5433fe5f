"""Execute scenarios and sweeps, writing trajectories, verdicts and a log."""

from __future__ import annotations

import itertools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import many_ring as mr
from . import ring, spin, ssb
from .config import ConfigError, Scenario, apply_overrides, load_scenario, validate_data
from .numerics import NumericalGuardError, SplitStepPropagator, Trajectory, gaussian_packet

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_INTERNAL = 0, 1, 2, 3
WORKERS_ENV = "QTCRYSTAL_WORKERS"
SCHEMA_PATH = Path(__file__).with_name("schemas") / "verdicts.schema.json"
SCHEMA_VERSION = 1


def _clean(value):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (complex, np.complexfloating)):
        return [_clean(value.real), _clean(value.imag)]
    return value


class Report:
    def __init__(self, scenario: Scenario, log: logging.Logger):
        self.scenario = scenario
        self.log = log
        self.trajectories: list[Trajectory] = []
        self.evaluators: dict = {}
        self.verdicts: list[dict] = []
        self.checks: list[dict] = []
        self.tolerances: dict = {}

    def check(self, analysis: str, passed: bool, tolerance: float | None, **values):
        self.checks.append({"analysis": analysis, "passed": bool(passed), "tolerance": tolerance,
                            "values": values})
        self.log.info("check %s: %s", analysis, "pass" if passed else "FAIL")

    def verdict(self, analysis: str, v: ssb.SymmetryVerdict):
        rec = v.to_dict()
        rec["analysis"] = analysis
        self.verdicts.append(rec)
        self.log.info("verdict %s on %s: %s (period %s)", analysis, v.observable, v.verdict,
                      v.residual_period)

    def write(self, out: Path, status: str, error: str | None = None):
        out.mkdir(parents=True, exist_ok=True)
        rows = ["t,observable,re,im"]
        for traj in self.trajectories:
            for t, z in zip(traj.times, traj.values):
                rows.append(f"{t:.16e},{traj.observable},{z.real:.16e},{z.imag:.16e}")
        (out / "trajectories.csv").write_text("\n".join(rows) + "\n")
        doc = {
            "schema_version": SCHEMA_VERSION,
            "status": status,
            "error": error,
            "provenance": {
                "spec_hash": self.scenario.hash(),
                "seed": self.scenario.seed,
                "model": self.scenario.model,
                "package_version": __version__,
                "parameters": self.scenario.section.model_dump(mode="json"),
            },
            "tolerances": self.tolerances,
            "verdicts": self.verdicts,
            "checks": self.checks,
        }
        (out / "verdicts.json").write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")
        marker = out / "PARTIAL"
        if status == "complete":
            marker.unlink(missing_ok=True)
        else:
            marker.write_text(f"run did not complete: {error}\n")


# ---------------------------------------------------------------------------
# per-model pipelines


def _spin(sc: Scenario, rep: Report, times):
    cfg = sc.spin
    chain = spin.SpinChainSpec(cfg.sites, cfg.J, cfg.h, cfg.boundary)
    for obs in sc.observables:
        if obs.kind == "sigma_x_av":
            def evaluate(ts):
                return spin.sigma_x_trajectory_ed(chain, ts).values
        else:
            def evaluate(ts):
                return spin.sigma_x_trajectory_analytic(cfg.h, ts).values
        rep.evaluators[obs.label] = evaluate
        meta = {"sites": cfg.sites, "J": cfg.J, "h": cfg.h, "kind": obs.kind}
        rep.trajectories.append(Trajectory(times, evaluate(times), obs.label, meta))
    for a in sc.analyses:
        if a.name == "ed_check":
            tol = a.tolerance or 1e-8
            ed = spin.sigma_x_trajectory_ed(chain, times)
            err = float(np.max(np.abs(ed.values - np.cos(cfg.h * times))))
            rep.check("ed_check", err < tol, tol, max_abs_error=err,
                      commutator_norm=spin.exchange_field_commutator_norm(chain))
        elif a.name == "variance_scaling":
            sizes = a.sizes or [16, 64, 256, 1024]
            x_state = spin.SpinProductState.all_x(1).local_vectors()[0]
            sx = ssb.variance_scaling(spin.SIGMA_X, x_state, sizes)
            sz = ssb.variance_scaling(spin.SIGMA_Z, x_state, sizes)
            tol = a.tolerance or 0.02
            ok = sx.exact_zero and abs(sz.slope + 1) < tol
            rep.check("variance_scaling", ok, tol, sigma_x=sx.to_dict(), sigma_z=sz.to_dict())
        elif a.name == "cluster":
            sites = min(cfg.sites, 8)
            psi = spin.SpinProductState.all_x(sites).to_vector()
            d = ssb.cluster_deficit(psi, spin.SIGMA_X, spin.SIGMA_X, a.separation, sites, 2)
            tol = a.tolerance or 1e-14
            rep.check("cluster", d < tol, tol, deficit=d, separation=a.separation)


def _ring(sc: Scenario, rep: Report, times):
    cfg = sc.ring
    grid = cfg.grid.spec()
    psi0 = gaussian_packet(grid, cfg.packet.center, cfg.packet.width, cfg.packet.momentum)
    prop = SplitStepPropagator(grid, cfg.alpha, cfg.h)

    def ring_values(obs, states):
        if obs.kind == "V":
            return [grid.momentum_expectation(s, lambda k: np.exp(1j * obs.beta * k)) for s in states]
        return [grid.position_expectation(s, lambda x: np.exp(1j * obs.n * x)) for s in states]

    if sc.observables:
        states = prop.run(psi0, times)
        for obs in sc.observables:
            rep.evaluators[obs.label] = lambda ts, obs=obs: ring_values(obs, prop.run(psi0, ts))
            meta = {"alpha": cfg.alpha, "h": cfg.h}
            rep.trajectories.append(Trajectory(times, ring_values(obs, states), obs.label, meta))
    sector = ring.ThetaSector(cfg.theta, cfg.truncation, cfg.alpha)
    for a in sc.analyses:
        if a.name == "phase":
            for traj, obs in zip(rep.trajectories, sc.observables):
                if obs.kind != "V":
                    continue
                d = ring.phase_diagnostics(traj)
                expected = abs(obs.beta * cfg.h)
                tol = a.tolerance or 1e-4
                rel = abs(abs(d.slope) - expected) / expected if expected else abs(d.slope)
                ok = rel < tol and d.modulus_drift < 1e-6
                rep.check("phase", ok, tol, observable=obs.label, slope=d.slope,
                          expected_slope_magnitude=expected, modulus_drift=d.modulus_drift,
                          linear_fit_residual=d.fit_residual)
        elif a.name == "spectrum_shift":
            count = 2 * cfg.truncation + 1
            lhs = ring.theta_spectrum(sector, count)
            zero, _ = ring.zero_flux_sector(sector)
            rhs = ring.theta_spectrum(zero, count)
            err = float(np.max(np.abs(lhs - rhs)))
            tol = a.tolerance or 1e-12
            rep.check("spectrum_shift", err < tol, tol, max_abs_difference=err,
                      shifted_theta=zero.theta, lowest=lhs[:5].tolist())
        elif a.name == "central_element":
            rng = np.random.default_rng(sc.seed)
            target = complex(np.exp(1j * cfg.theta))
            err = max(
                abs(ring.sector_expectation(ring.V(2 * math.pi), sector,
                                            ring.random_sector_state(sector, rng)) - target)
                for _ in range(16)
            )
            tol = a.tolerance or 1e-12
            rep.check("central_element", err < tol, tol, max_abs_error=err, theta=cfg.theta)
        elif a.name == "rho_theta":
            rng = np.random.default_rng(sc.seed)
            psi = ring.random_sector_state(sector, rng)
            rho = ring.RhoThetaMap(math.pi)
            d = ssb.order_parameter_deficit(
                lambda o: ring.sector_expectation(o, sector, psi), rho, ring.V(2 * math.pi))
            tol = a.tolerance or 1e-12
            rep.check("rho_theta", abs(d - 2) < tol, tol, deficit=d, theta=cfg.theta)
        elif a.name == "zassenhaus":
            t = min(a.t if a.t is not None else 1.0, 1.0)
            resid = ring.zassenhaus_check(grid, cfg.alpha, cfg.h, 1, t, seed=sc.seed)
            control = ring.zassenhaus_check(grid, cfg.alpha, 0.0, 1, t, seed=sc.seed)
            tol = a.tolerance or 1e-5
            rep.check("zassenhaus", resid < tol and control < 1e-10, tol, residual=resid,
                      h0_control=control, t=t, n=1)


def _many_ring(sc: Scenario, rep: Report, times):
    cfg = sc.many_ring
    pair = cfg.pair_potential.function() if cfg.pair_potential else None
    spec = mr.ManyRingSpec(cfg.rings, cfg.alpha, cfg.potential.function(), cfg.window.function(), pair)
    F = cfg.test_function.function()
    for obs in sc.observables:
        what = "p_f" if obs.kind == "p_f" else obs.function.function()

        def evaluate(ts, what=what):
            return mr.circle_trajectory(spec, what, ts, cfg.truncation).values

        rep.evaluators[obs.label] = evaluate
        rep.trajectories.append(Trajectory(times, evaluate(times), obs.label, {"rings": cfg.rings}))
    for a in sc.analyses:
        if a.name == "ehrenfest":
            tol = a.tolerance or 1e-4
            d1 = mr.ehrenfest_d1(spec)
            d2 = mr.ehrenfest_d2(spec, F)
            c1, _ = mr.circle_derivatives(spec, "p_f", cfg.truncation)
            _, c2 = mr.circle_derivatives(spec, F, cfg.truncation)
            l1 = mr.propagated_derivative(spec, "p_f", 1).value
            l2 = mr.propagated_derivative(spec, F, 2).value
            f1 = mr.propagated_derivative(spec, F, 1).value
            ok = (abs(c1 - d1) < 1e-6 and abs(c2 - d2) < 1e-6 and abs(l1 - d1) < tol
                  and abs(l2 - d2) < 1e-3 and abs(f1) < 1e-5)
            rep.check("ehrenfest", ok, tol, d1_quadrature=d1, d1_circle=c1, d1_line=l1,
                      d2_quadrature=d2, d2_circle=c2, d2_line=l2, dF_dt_line=f1,
                      dF_dt_quadrature=mr.first_derivative_vanishes_for_F(spec, F))
        elif a.name == "p_av":
            v = mr.p_av_time_nontriviality(spec)
            rep.check("p_av", abs(v) > 1e-10, 1e-10, d_dt_P_av=v, rings=cfg.rings,
                      mean_localized_momentum=mr.localized_momentum_expectation(spec))
        elif a.name == "variance_scaling":
            sizes = a.sizes or [16, 64, 256, 1024]
            sector, psi = mr.default_ring_state(spec, cfg.truncation)
            A = ring.observable_matrix(ring.LocalizedMomentum(spec.window), sector)
            res = ssb.variance_scaling(A, psi, sizes)
            tol = a.tolerance or 0.02
            ok = res.slope is not None and abs(res.slope + 1) < tol
            rep.check("variance_scaling", ok, tol, scaling=res.to_dict(),
                      single_ring_variance_quadrature=mr.localized_momentum_variance(spec))
        elif a.name == "cluster":
            sector, psi = mr.default_ring_state(spec, cfg.truncation)
            A = ring.observable_matrix(ring.LocalizedMomentum(spec.window), sector)
            state = ssb.ProductState.uniform(psi, max(cfg.rings, 2))
            d = ssb.cluster_deficit(state, A, A, a.separation)
            tol = a.tolerance or 1e-14
            rep.check("cluster", d < tol, tol, deficit=d, separation=a.separation)
        elif a.name == "pair_potential":
            if pair is None:
                raise ConfigError(["pair_potential analysis needs many_ring.pair_potential"])
            res = mr.pair_potential_no_contribution(spec, F)
            tol = a.tolerance or 1e-5
            rep.check("pair_potential", res.d1_deficit < tol and res.d2_deficit < tol, tol,
                      **res._asdict())


PIPELINES = {"spin": _spin, "ring": _ring, "many-ring": _many_ring}


def _time_analyses(sc: Scenario, rep: Report, times):
    propagated = sc.model == "ring"
    for a in sc.analyses:
        if a.name == "period":
            tol = a.tolerance or (ssb.PERIOD_TOL_PROPAGATED if propagated else ssb.PERIOD_TOL_ANALYTIC)
            rep.tolerances["period"] = tol
            for traj in rep.trajectories:
                v = ssb.detect_residual_period(traj, tol)
                if sc.model == "spin" and traj.observable.startswith("sigma_x") and sc.spin.h > 0:
                    v.notes.update(_claimed_subgroup_note(sc.spin.h, v))
                rep.verdict("period", v)
        elif a.name == "deficit":
            t = a.t if a.t is not None else float(times[-1])
            for traj in rep.trajectories:
                pair = Trajectory([0.0, t], rep.evaluators[traj.observable](np.array([0.0, t])),
                                  traj.observable)
                d = ssb.time_translation_deficit(pair, t)
                v = ssb.SymmetryVerdict("broken" if d > 1e-8 else "unbroken", d,
                                        sample_count=len(traj), tolerance=1e-8,
                                        observable=traj.observable, notes={"t": t})
                rep.verdict("deficit", v)


def _claimed_subgroup_note(h: float, v: ssb.SymmetryVerdict) -> dict:
    """Compare the measured period with invariance at t = (n + 1/2) pi / h."""
    shift = 0.5 * math.pi / h
    probe = np.linspace(0, 2 * math.pi / h, 257)
    mismatch = float(np.max(np.abs(np.cos(h * (probe + shift)) - np.cos(h * probe))))
    return {
        "claimed_invariance_times": "(n + 1/2) * pi / |h|",
        "claimed_shift_discrepancy": mismatch,
        "claimed_consistent_with_trajectory": mismatch < 1e-8,
        "measured_invariance_times": "n * residual_period",
    }


# ---------------------------------------------------------------------------
# entry points


def _logger(out: Path) -> logging.Logger:
    log = logging.getLogger(f"qtcrystal.run.{out.resolve()}")
    log.handlers.clear()
    log.propagate = False
    log.setLevel(logging.INFO)
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(handler)
    return log


def execute(sc: Scenario, out) -> int:
    """Run a validated scenario into ``out``; returns the exit code."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    log = _logger(out)
    log.info("scenario %s model=%s seed=%d", sc.hash(), sc.model, sc.seed)
    rep = Report(sc, log)
    times = sc.times.values()
    try:
        PIPELINES[sc.model](sc, rep, times)
        _time_analyses(sc, rep, times)
        rep.write(out, "complete")
        log.info("done")
        return EXIT_OK
    except ConfigError as exc:
        log.error("config error: %s", exc)
        rep.write(out, "failed", str(exc))
        return EXIT_CONFIG
    except NumericalGuardError as exc:
        log.error("numerical guard: %s", exc)
        rep.write(out, "failed", f"numerical guard: {exc}")
        return EXIT_GUARD
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        rep.write(out, "failed", f"internal error: {exc!r}")
        return EXIT_INTERNAL
    finally:
        for h in list(log.handlers):
            h.close()
            log.removeHandler(h)


def run_scenario(path, out=None) -> int:
    sc = load_scenario(path)
    target = out or sc.output
    if target is None:
        raise ConfigError([f"{path}: no output directory (set 'output' or pass --out)"])
    return execute(sc, target)


def parse_grid(items) -> dict:
    """``["ring.h=0.5,1,2", ...]`` to an ordered mapping of value lists."""
    grid = {}
    for item in items:
        if "=" not in item:
            raise ConfigError([f"grid spec {item!r} must look like key=v1,v2,..."])
        key, vals = item.split("=", 1)
        try:
            values = [json.loads(v) for v in vals.split(",") if v.strip()]
        except json.JSONDecodeError:
            raise ConfigError([f"grid values for {key!r} must be numbers: {vals!r}"]) from None
        if not values or not all(isinstance(v, (int, float)) for v in values):
            raise ConfigError([f"grid values for {key!r} must be numbers: {vals!r}"])
        grid[key.strip()] = values
    return grid


def _sweep_point(args):
    data, out, source = args
    try:
        sc = validate_data(data, source)
    except ConfigError as exc:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "PARTIAL").write_text(str(exc) + "\n")
        return EXIT_CONFIG
    return execute(sc, out)


def sweep(path, grid_items, out=None, workers: int | None = None) -> int:
    """Run the scenario once per grid point into ``point_###`` directories."""
    import yaml

    path = Path(path)
    base_sc = load_scenario(path)
    data = yaml.safe_load(path.read_text())
    grid = parse_grid(grid_items)
    target = Path(out or base_sc.output or "")
    if not str(target):
        raise ConfigError([f"{path}: no output directory (set 'output' or pass --out)"])
    target.mkdir(parents=True, exist_ok=True)
    keys = list(grid)
    points = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    jobs = []
    for i, params in enumerate(points):
        jobs.append((apply_overrides(data, params), str(target / f"point_{i:03d}"),
                     f"{path} [point {i}: {params}]"))
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            codes = list(pool.map(_sweep_point, jobs))
    else:
        codes = [_sweep_point(j) for j in jobs]
    index = []
    for i, (params, code) in enumerate(zip(points, codes)):
        entry = {"index": i, "parameters": params, "directory": f"point_{i:03d}", "exit_code": code}
        vfile = target / entry["directory"] / "verdicts.json"
        if vfile.exists():
            doc = json.loads(vfile.read_text())
            entry["status"] = doc["status"]
            entry["residual_periods"] = {
                v["observable"]: v["residual_period"] for v in doc["verdicts"] if v["analysis"] == "period"
            }
            entry["checks_passed"] = all(c["passed"] for c in doc["checks"])
        index.append(entry)
    (target / "index.json").write_text(json.dumps(_clean({"grid": grid, "points": index}),
                                                  indent=2, sort_keys=True) + "\n")
    return max(codes) if codes else EXIT_OK
