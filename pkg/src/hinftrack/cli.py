"""Command-line entry point: ``hinftrack <command> [options]``.

Exit codes: 0 success, 1 usage/config error, 2 validation failure,
3 infeasible synthesis, 4 verification failure, 5 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from .analysis import UnstableSystemError, pbh_detectable, verify_definition1, verify_theorem1
from .config import (ConfigError, ProjectConfig, certificate_to_dict, dump_yaml, load_config,
                     load_yaml, read_gain)
from .kernel import DimensionError
from .plant import ProtocolGain, coupled_error_system
from .simulation import (DisturbanceSpec, SimulationDivergence, energy_curves, first_step_below,
                         predicted_decay_step, simulate, tracking_error, write_csv)
from .synthesis import (SolverOptions, SynthesisBreakdown, SynthesisInfeasible, bisect_gamma,
                        certify, solve_feasibility)
from .topology import build_stochastic, follower_spectrum, has_leader_spanning_tree, validate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_VERIFY = 4
EXIT_NUMERIC = 5

DECAY_THRESHOLD = 1e-6


class _Stop(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def demo_config_path() -> Path:
    return Path(str(resources.files("hinftrack") / "data" / "demo.yaml"))


def _out(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(text: str = "") -> None:
    print(text)


def _load(args) -> ProjectConfig:
    if not args.config:
        raise _Stop(EXIT_USAGE, "--config is required")
    cfg = load_config(args.config)
    if getattr(args, "gamma", None) is not None:
        if args.gamma <= 0:
            raise _Stop(EXIT_USAGE, "--gamma must be positive")
        cfg.gamma = args.gamma
    return cfg


def _validation(cfg: ProjectConfig) -> dict:
    rep = validate(cfg.adjacency)
    tree = has_leader_spanning_tree(cfg.adjacency)
    aug = cfg.augmented()
    detectable = pbh_detectable(aug.A_hat, aug.C_tilde)
    return {
        "topology_valid": rep.ok,
        "violations": rep.violations,
        "asymmetric_pairs": [list(p) for p in rep.asymmetric_pairs],
        "spanning_tree": tree,
        "detectable": detectable,
        "passed": rep.ok and tree and detectable,
    }


def _spectrum(cfg: ProjectConfig):
    rep = validate(cfg.adjacency)
    if not rep.ok:
        raise _Stop(EXIT_VALIDATION, "topology invalid: " + "; ".join(rep.violations))
    dec = build_stochastic(cfg.adjacency, cfg.h)
    return dec, follower_spectrum(dec)


def _spectrum_dict(dec, spec) -> dict:
    return {
        "h": dec.h,
        "kappa0": dec.kappa0,
        "kappa": dec.kappa,
        "delta": dec.delta,
        "D_breve": dec.D_breve,
        "d_breve": dec.d_breve,
        "eigenvalues": spec.eigenvalues,
        "lambda0": spec.lambda0,
    }


def _print_matrix(name: str, M) -> None:
    M = np.atleast_2d(M)
    _emit(f"{name} =")
    for row in M:
        _emit("  [" + "  ".join(f"{v: .6f}" for v in row) + "]")


def _print_report(title: str, rep) -> None:
    _emit(f"{title}: {'PASS' if rep.passed else 'FAIL'} (gamma={rep.gamma:g}, "
          f"margin={rep.margin:.6g})")
    for s in rep.systems:
        lam = f" lambda={s.eigenvalue:.6f}" if s.eigenvalue is not None else ""
        norm = f"{s.norm:.9f}" if s.hinf is not None else "undefined (unstable)"
        _emit(f"  system {s.index}:{lam} radius={s.spectral_radius:.9f} "
              f"schur={s.schur} hinf={norm}")
    if rep.crosscheck_rel_diff is not None:
        _emit(f"  coupled vs max decoupled relative difference: {rep.crosscheck_rel_diff:.3e}")
    for note in rep.notes:
        _emit(f"  note: {note}")


def _solver_options(cfg: ProjectConfig, args) -> SolverOptions:
    opts = cfg.solver
    eps = getattr(args, "eps", None)
    if eps is not None:
        if eps == "free":
            opts.fixed_eps = None
        else:
            try:
                opts.fixed_eps = float(eps)
            except ValueError:
                raise _Stop(EXIT_USAGE, "--eps must be a number or 'free'") from None
            if opts.fixed_eps <= 0:
                raise _Stop(EXIT_USAGE, "--eps must be positive")
    if getattr(args, "seed", None) is not None:
        opts.seed = args.seed
    return opts


def _gain(cfg: ProjectConfig, path) -> np.ndarray:
    if not path:
        raise _Stop(EXIT_USAGE, "--gain is required")
    F = read_gain(path)
    aug = cfg.augmented()
    try:
        ProtocolGain.for_system(F, aug)
    except DimensionError as exc:
        raise _Stop(EXIT_USAGE, f"gain does not match the configuration: {exc}") from None
    return F


def _disturbance(cfg: ProjectConfig, arg) -> DisturbanceSpec:
    if arg is None:
        return cfg.simulation.disturbance
    if arg == "none":
        return DisturbanceSpec("none")
    if arg == "paper":
        d = cfg.simulation.disturbance
        return d if d.kind == "paper_sine" else DisturbanceSpec("paper_sine")
    tree = load_yaml(arg)
    table = tree.get("table") if isinstance(tree, dict) else tree
    try:
        return DisturbanceSpec("table", table=np.array(table, dtype=float))
    except (TypeError, ValueError) as exc:
        raise _Stop(EXIT_USAGE, f"{arg}: bad disturbance table ({exc})") from None


# -- commands ---------------------------------------------------------------

def cmd_validate(args) -> int:
    cfg = _load(args)
    res = _validation(cfg)
    _emit(f"topology: {'valid' if res['topology_valid'] else 'INVALID'}")
    for v in res["violations"]:
        _emit(f"  - {v}")
    _emit(f"leader-rooted spanning tree: {'yes' if res['spanning_tree'] else 'NO'}")
    _emit(f"(C_tilde, A_hat) detectable: {'yes' if res['detectable'] else 'NO'}")
    if args.out:
        dump_yaml(res, _out(args) / "validate.yaml")
    return EXIT_OK if res["passed"] else EXIT_VALIDATION


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    dec, spec = _spectrum(cfg)
    _emit(f"kappa0 = {dec.kappa0:.17g}")
    _emit(f"kappa  = {dec.kappa:.17g}")
    _emit("delta  = [" + ", ".join(f"{v:.17g}" for v in dec.delta) + "]")
    _print_matrix("D_breve", dec.D_breve)
    _emit("d_breve = [" + ", ".join(f"{v:.17g}" for v in dec.d_breve) + "]")
    _emit("eigenvalues = [" + ", ".join(f"{v:.17g}" for v in spec.eigenvalues) + "]")
    _emit(f"lambda0 = {spec.lambda0:.17g}")
    _emit("---")
    _emit(dump_yaml({"spectrum": _spectrum_dict(dec, spec)}).rstrip())
    if args.out:
        dump_yaml({"spectrum": _spectrum_dict(dec, spec)}, _out(args) / "spectrum.yaml")
    return EXIT_OK


def _synthesize(cfg: ProjectConfig, args, out: Path, name: str = "certificate.yaml"):
    aug = cfg.augmented()
    dec, spec = _spectrum(cfg)
    opts = _solver_options(cfg, args)
    history = None
    if getattr(args, "bisect_gamma", False):
        # each probe is logged by the synthesis module; the bracket also goes in the file
        cert, history = bisect_gamma(aug, spec.lambda0, opts, gamma_hi=cfg.gamma, tol=1e-3)
    else:
        cert = solve_feasibility(aug, cfg.gamma, spec.lambda0, opts)
    report = certify(cert, aug, spec, dec=dec)
    data = certificate_to_dict(cert)
    if history is not None:
        data["gamma_bisection"] = [{"gamma": g, "feasible": ok} for g, ok in history]
    data["certification"] = report.to_dict()
    dump_yaml(data, out / name)
    return cert, report


def cmd_synthesize(args) -> int:
    cfg = _load(args)
    out = _out(args)
    cert, report = _synthesize(cfg, args, out)
    _emit(f"feasible at gamma={cert.gamma:.9g} (restart {cert.restart}, "
          f"{cert.iterations} iterations, phi={cert.phi:.3e})")
    _emit("margins: lmi1={:.3e} lmi2={:.3e} P={:.3e}".format(*cert.margins))
    _print_matrix("F", cert.F.T)
    _print_report("decoupled check", report.decoupled)
    if report.coupled is not None:
        _print_report("coupled check", report.coupled)
    _emit(f"certificate written to {out / 'certificate.yaml'}")
    return EXIT_OK if report.passed else EXIT_VERIFY


def _verify(cfg: ProjectConfig, F):
    aug = cfg.augmented()
    dec, spec = _spectrum(cfg)
    t1 = verify_theorem1(aug, F, spec, cfg.gamma)
    d1 = verify_definition1(aug, F, dec, cfg.gamma, spec=spec)
    return t1, d1


def cmd_verify(args) -> int:
    cfg = _load(args)
    F = _gain(cfg, args.gain)
    t1, d1 = _verify(cfg, F)
    _print_report("decoupled check", t1)
    _print_report("coupled check", d1)
    if args.out:
        dump_yaml({"decoupled": t1.to_dict(), "coupled": d1.to_dict()}, _out(args) / "verify.yaml")
    ok = t1.passed and d1.passed and d1.consistent
    return EXIT_OK if ok else EXIT_VERIFY


def _run_sim(cfg: ProjectConfig, F, out: Path, stem: str, *, horizon, seed, dist, initial,
             plots: bool = True) -> dict:
    from .plotting import plot_block_states, plot_energy, plot_tracking_error

    aug = cfg.augmented()
    dec = build_stochastic(cfg.adjacency, cfg.h)
    sc = cfg.simulation.sim_config(aug, cfg.n_followers, horizon=horizon, seed=seed,
                                   disturbance=dist, initial=initial)
    traj = simulate(cfg.adjacency, dec, aug, F, sc)
    write_csv(traj, out / f"{stem}.csv", cfg.gamma)
    E = tracking_error(traj)
    res = {
        "csv": f"{stem}.csv",
        "horizon": traj.horizon,
        "E0": float(E[0]),
        "E_final": float(E[-1]),
        "first_step_below_1e-6": first_step_below(E, DECAY_THRESHOLD),
    }
    if traj.zero_initial:
        ee, ww = energy_curves(traj, cfg.gamma)
        res["energy_e_final"] = float(ee[-1])
        res["energy_w_final"] = float(ww[-1])
        res["energy_inequality"] = bool(np.all(ee <= ww))
    if plots:
        plot_block_states(traj, out, f"{stem}_states")
        plot_tracking_error(traj, out / f"{stem}_tracking_error.svg")
        if traj.zero_initial:
            plot_energy(traj, cfg.gamma, out / f"{stem}_energy.svg")
    return res


def cmd_simulate(args) -> int:
    cfg = _load(args)
    F = _gain(cfg, args.gain)
    if args.horizon is not None and args.horizon < 1:
        raise _Stop(EXIT_USAGE, "--horizon must be >= 1")
    t1, _ = _verify(cfg, F)
    if not t1.passed:
        print("warning: gain does not pass verification", file=sys.stderr)
    out = _out(args)
    res = _run_sim(cfg, F, out, "trajectory", horizon=args.horizon, seed=args.seed,
                   dist=_disturbance(cfg, args.disturbance), initial=args.initial)
    for k, v in res.items():
        _emit(f"{k}: {v}")
    return EXIT_OK


def cmd_demo(args) -> int:
    """Run the full pipeline on the bundled worked example."""
    t0 = time.perf_counter()
    cfg = load_config(args.config or demo_config_path())
    out = _out(args)
    if args.seed is not None:
        cfg.simulation.seed = args.seed
    stages = {}
    summary = {"stages": stages}

    val = _validation(cfg)
    dump_yaml(val, out / "validate.yaml")
    stages["validate"] = val["passed"]
    _emit(f"[validate] {'pass' if val['passed'] else 'FAIL'}")
    if not val["passed"]:
        dump_yaml(summary, out / "summary.yaml")
        return EXIT_VALIDATION

    dec, spec = _spectrum(cfg)
    dump_yaml({"spectrum": _spectrum_dict(dec, spec)}, out / "spectrum.yaml")
    stages["spectrum"] = True
    _emit(f"[spectrum] lambda = {np.array2string(spec.eigenvalues, precision=6)}, "
          f"lambda0 = {spec.lambda0:.6f}")

    args.eps = "0.25" if args.eps is None else args.eps
    cert, creport = _synthesize(cfg, args, out)
    stages["synthesize"] = creport.passed
    _emit(f"[synthesize] F = {np.array2string(cert.F.ravel(), precision=6)}, "
          f"margins = {', '.join(f'{m:.3e}' for m in cert.margins)}")

    gains = {"synthesized": cert.F}
    if cfg.reference_gain is not None:
        gains["reference"] = cfg.reference_gain
    aug = cfg.augmented()
    for name, F in gains.items():
        t1, d1 = _verify(cfg, F)
        dump_yaml({"decoupled": t1.to_dict(), "coupled": d1.to_dict()},
                  out / f"verify_{name}_gain.yaml")
        ok = t1.passed and d1.passed and d1.consistent
        stages[f"verify_{name}"] = ok
        _emit(f"[verify {name}] {'pass' if ok else 'FAIL'}: norms "
              f"{', '.join(f'{s.norm:.6f}' for s in t1.systems)}; coupled {d1.max_norm:.6f}")

        # undisturbed: horizon from the modal decay bound
        rng_sc = cfg.simulation.sim_config(aug, cfg.n_followers, initial="random")
        theta0, x0, z0 = rng_sc.initial_state(aug, cfg.n_followers)
        zeta0 = np.concatenate([z0.reshape(cfg.n_followers, -1), x0], axis=1)
        E0 = float(np.sum((zeta0 - theta0) ** 2))
        A_cl = coupled_error_system(aug, F, dec).A
        K = max(1, predicted_decay_step(A_cl, E0, DECAY_THRESHOLD))
        r = _run_sim(cfg, F, out, f"sim_{name}_undisturbed", horizon=K, seed=None,
                     dist=DisturbanceSpec("none"), initial="random")
        r["predicted_decay_step"] = K
        ok_decay = r["first_step_below_1e-6"] is not None and r["E_final"] < DECAY_THRESHOLD
        stages[f"simulate_{name}_undisturbed"] = ok_decay
        _emit(f"[simulate {name}, no disturbance] E(k) < 1e-6 from k = "
              f"{r['first_step_below_1e-6']} (bound {K}): {'pass' if ok_decay else 'FAIL'}")

        r2 = _run_sim(cfg, F, out, f"sim_{name}_disturbed", horizon=cfg.simulation.horizon,
                      seed=None, dist=cfg.simulation.disturbance, initial="zero")
        stages[f"simulate_{name}_disturbed"] = r2["energy_inequality"]
        _emit(f"[simulate {name}, disturbance] energy {r2['energy_e_final']:.6g} <= "
              f"{r2['energy_w_final']:.6g} at every prefix: "
              f"{'pass' if r2['energy_inequality'] else 'FAIL'}")
        summary[f"simulation_{name}"] = {"undisturbed": r, "disturbed": r2}

    summary["passed"] = all(stages.values())
    dump_yaml(summary, out / "summary.yaml")
    _emit(f"[demo] {'all stages passed' if summary['passed'] else 'FAILED'} "
          f"in {time.perf_counter() - t0:.1f} s; outputs in {out}")
    if summary["passed"]:
        return EXIT_OK
    return EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hinftrack", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, gain=False):
        sp.add_argument("--config", help="project configuration (YAML or JSON)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--gamma", type=float, help="override the performance level")
        if gain:
            sp.add_argument("--gain", help="gain or certificate file")
        return sp

    common(sub.add_parser("validate", help="check graph assumptions and detectability"))
    common(sub.add_parser("spectrum", help="print the scaled topology matrix and its spectrum"))
    sp = common(sub.add_parser("synthesize", help="solve the LMIs for a protocol gain"))
    sp.add_argument("--eps", help="fix eps to a positive value, or 'free'")
    sp.add_argument("--seed", type=int, help="solver restart seed")
    sp.add_argument("--bisect-gamma", action="store_true",
                    help="search for the smallest feasible gamma (tolerance 1e-3)")
    common(sub.add_parser("verify", help="check a gain against the tracking conditions"), gain=True)
    sp = common(sub.add_parser("simulate", help="simulate the closed-loop network"), gain=True)
    sp.add_argument("--seed", type=int, help="seed for random initial states")
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--disturbance", help="none, paper (25 sin(i(k-1)) for k <= 200), or a disturbance table file")
    sp.add_argument("--initial", choices=["random", "zero", "explicit"])
    sp = sub.add_parser("demo", help="reproduce the bundled worked example end to end")
    sp.add_argument("--out", default="demo_output")
    sp.add_argument("--config", help="use another configuration instead of the bundled one")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--eps", help="fix eps (default 0.25) or 'free'")
    sp.add_argument("--gamma", type=float, help=argparse.SUPPRESS)
    return p


COMMANDS = {
    "validate": cmd_validate,
    "spectrum": cmd_spectrum,
    "synthesize": cmd_synthesize,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "demo": cmd_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _Stop as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SynthesisInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SynthesisBreakdown, SimulationDivergence, UnstableSystemError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
