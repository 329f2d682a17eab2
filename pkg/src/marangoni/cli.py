"""Command-line driver: spectrum scans, profile design, normal forms,
Lorenz embedding, simulation, and pattern rendering.

Every command takes its parameters from flags and/or a JSON config file
(flags win); unknown config keys are rejected before any work starts.
Exit codes: 0 success, 1 validation error, 2 numerical failure.  Every file
written lands in the manifest with its sha256, so identical configs can be
checked for identical outputs.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .design import design_profile, verify_design
from .dynamics import integrate, lyapunov_exponent
from .modes import (COS, SIN, QuadraticNormalForm, assemble_normal_form,
                    build_mode_basis, make_inhomogeneity)
from .params import FluidParams, MarangoniError, ValidationError
from .patterns import (PatternSpec, reconstruct_field, reconstruct_surface,
                       write_pgm)
from .profiles import StepProfile, TemperatureProfile
from .quadsys import QuadraticSystem, embed_target, lift, lorenz_field
from .spectral import scan_to_csv, spectrum_scan


class Artifacts:
    """Tracks every output file and writes the manifest."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.entries = {}

    def path(self, name):
        return self.out_dir / name

    def register(self, path):
        path = Path(path)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.entries[path.name] = digest
        return path

    def write_text(self, name, text):
        p = self.path(name)
        p.write_text(text)
        return self.register(p)

    def finalize(self, meta=None):
        doc = {"files": self.entries}
        if meta:
            doc["meta"] = meta
        p = self.path("manifest.json")
        p.write_text(json.dumps(doc, indent=2, sort_keys=True))
        return p


# --------------------------------------------------------------------------
# config handling
# --------------------------------------------------------------------------

_ALLOWED = {
    "spectrum": {"out_dir", "profile", "z0", "kappa", "k_min", "k_max", "ks",
                 "nu", "h", "D", "b", "mode", "name"},
    "design": {"out_dir", "K_N", "kappa", "Dbar_c", "family", "name"},
    "normalform": {"out_dir", "profile", "nu", "h", "gamma", "u1", "eta1",
                   "name"},
    "embed": {"out_dir", "sigma", "rho", "beta", "xi", "N", "name"},
    "simulate": {"out_dir", "system", "X0", "dt", "T", "store_every", "name"},
    "pattern": {"out_dir", "wave_numbers", "weights", "gamma", "x_extent",
                "x_samples", "times", "dt", "source", "sigma", "rho", "beta",
                "xi", "seed", "name"},
    "pipeline": {"out_dir", "preset", "seed"},
}


def load_config(command, args):
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        unknown = set(cfg) - _ALLOWED[command]
        if unknown:
            raise ValidationError(
                f"unknown config keys for {command}: {sorted(unknown)}")
    for key in _ALLOWED[command]:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg.setdefault("out_dir", "marangoni_out")
    return cfg


def _parse_json_flag(text, what):
    if text is None:
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ValidationError(f"bad JSON for {what}: {err}")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_spectrum(cfg, art: Artifacts):
    nu = float(cfg.get("nu", 1e12))
    h = float(cfg.get("h", 10.0))
    b = float(cfg.get("b", 1.0))
    params = FluidParams(nu=nu, D_thermal=float(cfg.get("D", 1.0)), b=b, h=h)
    prof_cfg = cfg.get("profile", "step")
    if prof_cfg == "step":
        profile = StepProfile(float(cfg.get("z0", 0.0008)))
    else:
        profile = TemperatureProfile.load(prof_cfg)
    ks = cfg.get("ks") or list(range(int(cfg.get("k_min", 1)),
                                     int(cfg.get("k_max", 6)) + 1))
    rows = spectrum_scan(ks, params, profile, mode=cfg.get("mode", "limit"))
    name = cfg.get("name", "spectrum") + ".csv"
    art.write_text(name, scan_to_csv(rows))
    return {"rows": len(rows), "converged": all(r.converged for r in rows)}


def cmd_design(cfg, art: Artifacts):
    K_N = cfg.get("K_N", [1, 2, 3, 5])
    kappa = float(cfg.get("kappa", 0.05))
    result = design_profile(K_N, kappa, Dbar_c=cfg.get("Dbar_c"),
                            family=cfg.get("family", "comb"))
    report = verify_design(result)
    if not report.ok:
        raise MarangoniError("design verification failed: " +
                             "; ".join(report.failures))
    name = cfg.get("name", "profile") + ".json"
    result.profile.save(art.path(name))
    art.register(art.path(name))
    summary = {
        "K_N": list(result.K_N), "kappa": kappa, "b_c": result.b_c,
        "Dbar_c": result.Dbar_c, "d": result.d.tolist(),
        "residual_norm": result.residual_norm,
        "lambda_at_bc": report.lambda_at_bc,
    }
    art.write_text(cfg.get("name", "profile") + "_design.json",
                   json.dumps(summary, indent=2, sort_keys=True))
    return summary


def cmd_normalform(cfg, art: Artifacts):
    profile = TemperatureProfile.load(cfg["profile"])
    meta = profile.design_meta
    if not meta.get("K_N"):
        raise ValidationError("profile carries no design metadata")
    b_c = 1.0 / meta["Dbar_c"]
    params = FluidParams(nu=float(cfg.get("nu", 1e6)), D_thermal=1.0, b=b_c,
                         h=float(cfg.get("h", 10.0)))
    basis = build_mode_basis(meta["K_N"], params, profile)
    u1_spec = cfg.get("u1") or []
    eta_spec = cfg.get("eta1") or []

    def to_inhom(spec):
        comps = [(c["kind"], float(c["m"]), float(c["amp"])) for c in spec]
        return make_inhomogeneity(basis, comps)

    nf = assemble_normal_form(basis, to_inhom(u1_spec), to_inhom(eta_spec),
                              gamma=float(cfg.get("gamma", 0.05)))
    name = cfg.get("name", "normalform") + ".json"
    nf.save(art.path(name))
    art.register(art.path(name))
    return {"N": nf.N, "gamma": nf.gamma,
            "closure_residual": basis.closure_residual.tolist()}


def cmd_embed(cfg, art: Artifacts):
    target = lorenz_field(sigma=float(cfg.get("sigma", 10.0)),
                          rho=float(cfg.get("rho", 28.0)),
                          beta=float(cfg.get("beta", 8.0 / 3.0)))
    xi = float(cfg.get("xi", 0.01))
    sys_, dec = embed_target(target, xi, N=cfg.get("N"))
    name = cfg.get("name", "embedded") + ".json"
    sys_.save(art.path(name))
    art.register(art.path(name))
    return {"N": sys_.N, "xi": xi, "time_scale": sys_.time_scale,
            "I_p": list(dec.I_p), "theorem_window": sys_.theorem_window}


def cmd_simulate(cfg, art: Artifacts):
    sys_ = QuadraticSystem.load(cfg["system"])
    X0 = np.asarray(cfg.get("X0") or np.zeros(sys_.N), dtype=float)
    traj = integrate(sys_, X0, float(cfg.get("dt", 1e-3)),
                     float(cfg.get("T", 10.0)),
                     store_every=int(cfg.get("store_every", 10)))
    name = cfg.get("name", "trajectory") + ".csv"
    traj.to_csv(art.path(name))
    art.register(art.path(name))
    return {"samples": len(traj.times), "truncated": traj.truncated}


def _lorenz_amplitudes(cfg, times):
    """Slow-mode amplitudes (X1+,X2+,X3+) driven by the Lorenz system."""
    target = lorenz_field(sigma=float(cfg.get("sigma", 10.0)),
                          rho=float(cfg.get("rho", 28.0)),
                          beta=float(cfg.get("beta", 8.0 / 3.0)))
    dt = float(cfg.get("dt", 0.02))
    T = max(times)
    source = cfg.get("source", "direct")
    if source == "direct":
        traj = integrate(target, np.array([1.0, 1.0, 1.0]), dt, T)
        states = {t: traj.at_time(t) for t in times}
    elif source == "embedded":
        xi = float(cfg.get("xi", 0.01))
        sys_, dec = embed_target(target, xi)
        tau = sys_.time_scale
        X0 = lift(np.array([1.0, 1.0, 1.0]), sys_, dec, xi)
        dt_int = 0.2 * xi
        store = max(1, int(round(dt / (tau * dt_int))))
        traj = integrate(sys_, X0, dt_int, T / tau + dt_int, store_every=store)
        states = {}
        for t in times:
            X = traj.at_time(t / tau)
            states[t] = X[list(dec.I_p)]
    else:
        raise ValidationError(f"unknown amplitude source {source!r}")
    if traj.truncated:
        raise MarangoniError("amplitude trajectory blew up")
    return states


def cmd_pattern(cfg, art: Artifacts):
    ks = np.asarray(cfg.get("wave_numbers", [1.0, 2.1, 3.3]), dtype=float)
    weights = np.asarray(cfg.get("weights", np.ones(len(ks))), dtype=float)
    spec = PatternSpec(wave_numbers=ks, surface_weights=weights,
                       x_extent=float(cfg.get("x_extent", 8 * np.pi)),
                       x_samples=int(cfg.get("x_samples", 2048)),
                       gamma=float(cfg.get("gamma", 0.05)))
    times = [float(t) for t in cfg.get("times", [1000.0, 2000.0, 3000.0])]
    states = _lorenz_amplitudes(cfg, times)
    base = cfg.get("name", "pattern")
    outputs = {}
    for t in times:
        u = reconstruct_surface(spec, states[t])
        rows = ["x,u"] + ["%.17g,%.17g" % (x, v) for x, v in zip(spec.x, u)]
        art.write_text(f"{base}_t{int(t)}.csv", "\n".join(rows) + "\n")
        outputs[t] = float(np.max(np.abs(u)))
    grid = np.vstack([reconstruct_surface(spec, states[t]) for t in times])
    write_pgm(art.path(base + ".pgm"), grid)
    art.register(art.path(base + ".pgm"))
    art.register(art.path(base + ".pgm.json"))
    return {"times": times, "max_abs": outputs,
            "time_units": "normal-form time (gamma-scaled)"}


def cmd_pipeline(cfg, art: Artifacts):
    preset = cfg.get("preset", "fig00")
    if preset == "fig1":
        stage = "spectrum-step"
        out = {}
        out[stage] = cmd_spectrum({"out_dir": art.out_dir, "profile": "step",
                                   "z0": 0.0008, "k_min": 1, "k_max": 6,
                                   "name": "spectrum_step"}, art)
        stage = "design"
        design_summary = cmd_design({"out_dir": art.out_dir,
                                     "K_N": [1, 2, 3, 5], "kappa": 0.05,
                                     "name": "profile"}, art)
        out[stage] = design_summary
        stage = "spectrum-designed"
        out[stage] = cmd_spectrum({
            "out_dir": art.out_dir, "profile": str(art.path("profile.json")),
            "b": design_summary["b_c"], "k_min": 1, "k_max": 6,
            "name": "spectrum_designed"}, art)
        return out
    if preset == "fig00":
        return {"pattern": cmd_pattern({"out_dir": art.out_dir,
                                        "name": "pattern"}, art)}
    raise ValidationError(f"unknown preset {preset!r}")


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "design": cmd_design,
    "normalform": cmd_normalform,
    "embed": cmd_embed,
    "simulate": cmd_simulate,
    "pattern": cmd_pattern,
    "pipeline": cmd_pipeline,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="marangoni", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, *flags):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--name")
        for flag, kw in flags:
            p.add_argument(flag, **kw)
        return p

    add("spectrum",
        ("--profile", {}), ("--z0", {"type": float}), ("--k-min", {"type": int, "dest": "k_min"}),
        ("--k-max", {"type": int, "dest": "k_max"}), ("--nu", {"type": float}),
        ("--h", {"type": float}), ("--b", {"type": float}), ("--mode", {}))
    add("design",
        ("--K-N", {"dest": "K_N", "type": lambda s: [int(v) for v in s.split(",")]}),
        ("--kappa", {"type": float}), ("--Dbar-c", {"dest": "Dbar_c", "type": float}),
        ("--family", {}))
    add("normalform",
        ("--profile", {}), ("--nu", {"type": float}), ("--h", {"type": float}),
        ("--gamma", {"type": float}),
        ("--u1", {"type": lambda s: _parse_json_flag(s, "u1")}),
        ("--eta1", {"type": lambda s: _parse_json_flag(s, "eta1")}))
    add("embed",
        ("--sigma", {"type": float}), ("--rho", {"type": float}),
        ("--beta", {"type": float}), ("--xi", {"type": float}),
        ("--N", {"type": int}))
    add("simulate",
        ("--system", {}), ("--X0", {"type": lambda s: _parse_json_flag(s, "X0")}),
        ("--dt", {"type": float}), ("--T", {"type": float}),
        ("--store-every", {"dest": "store_every", "type": int}))
    add("pattern",
        ("--wave-numbers", {"dest": "wave_numbers",
                            "type": lambda s: [float(v) for v in s.split(",")]}),
        ("--gamma", {"type": float}), ("--x-extent", {"dest": "x_extent", "type": float}),
        ("--x-samples", {"dest": "x_samples", "type": int}),
        ("--times", {"type": lambda s: [float(v) for v in s.split(",")]}),
        ("--dt", {"type": float}), ("--source", {}), ("--seed", {"type": int}),
        ("--xi", {"type": float}))
    add("pipeline", ("--preset", {}), ("--seed", {"type": int}))
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args)
        art = Artifacts(cfg["out_dir"])
        summary = _COMMANDS[args.command](cfg, art)
        art.finalize(meta={"command": args.command,
                           "config": {k: v for k, v in sorted(cfg.items())
                                      if k != "out_dir"}})
        print(json.dumps({"status": "ok", "command": args.command,
                          "summary": summary}, default=str, sort_keys=True))
        return 0
    except ValidationError as err:
        print(f"validation error: {err}", file=sys.stderr)
        return 1
    except (MarangoniError, np.linalg.LinAlgError) as err:
        print(f"numerical failure ({args.command}): {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
