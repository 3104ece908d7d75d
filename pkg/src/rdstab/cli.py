"""Command-line pipeline: spectrum, synthesize, certify, simulate, report.

Each verb reads one JSON job description (``--config``) and writes its
artifacts into a directory (``--out``).  Outputs are deterministic: the
same config and build produce byte-identical files, floats are written in
shortest round-trip form, and every file lands atomically via a temporary
name and rename.  Exit codes: 0 success, 2 configuration problem, 3
certificate search exhausted, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

from .certification import Certificate, CertificateMargins, find_minimal_N
from .config import THEOREM_BY_FAMILY, JobConfig
from .errors import (
    ConfigError,
    InvalidPlant,
    MissingArtifact,
    NonPositiveData,
    NotFeasibleWithinBudget,
    RdstabError,
)
from .simulator import Trajectory, fit_decay_rate, lyapunov_diagnostic, simulate
from .spectral import (
    CertificateKind,
    SpectralData,
    analyze_plant,
    identity_residuals,
    measurement_traces,
)
from .synthesis import GainSet, design_gains, gainset_from_arrays

__all__ = ["main"]

# Acceptance thresholds used by the report verdicts: the fitted decay of
# the squared norm may undershoot 2*delta by 10%, and the scaled Lyapunov
# series may wiggle upward by 2% per recorded step.
DECAY_SLACK = 0.9
MONOTONE_STEP_TOL = 1.02


# ---------------------------------------------------------------------------
# deterministic artifact writing


def _fmt(value: float) -> str:
    return repr(float(value))


def _csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _json_text(payload: dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(text.encode("utf-8"))
    os.replace(tmp, path)


def _read_json(path: Path) -> dict[str, Any]:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"artifact {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"artifact {path} must hold a JSON object")
    return payload


# ---------------------------------------------------------------------------
# shared pipeline steps


def _load(args: argparse.Namespace) -> JobConfig:
    return JobConfig.from_file(args.config)


def _outdir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _analyze(cfg: JobConfig) -> SpectralData:
    return analyze_plant(cfg.plant, n_modes=cfg.n_modes, grid_size=cfg.grid_size)


def _resolve_gains(cfg: JobConfig, data: SpectralData,
                   given: bool) -> tuple[GainSet, str]:
    delta = cfg.gains_delta()
    if given:
        if cfg.gain_k is None or cfg.gain_l is None:
            raise ConfigError("--given-gains needs K and L arrays in the gains section")
        return gainset_from_arrays(cfg.plant, data, delta, cfg.gain_k, cfg.gain_l), "given"
    return design_gains(cfg.plant, data, delta, n0=cfg.n0), "designed"


def _certificate_payload(cert: Certificate, gains: GainSet, source: str,
                         reference: int | None) -> dict[str, Any]:
    assert cert.margins is not None
    m = cert.margins
    return {
        "schema": "rdstab-certificate/1",
        "family": cert.kind.value,
        "theorem": THEOREM_BY_FAMILY[cert.kind],
        "modes": cert.N,
        "n0": gains.n0,
        "delta": cert.delta,
        "alpha": cert.alpha,
        "beta": cert.beta,
        "gamma": cert.gamma,
        "epsilon": cert.epsilon,
        "margin_convention": "nonpositive when satisfied",
        "margins": {
            "theta1": m.theta1,
            "theta2": m.theta2,
            "theta3": m.theta3,
            "r1": m.r1,
            "r2": m.r2,
        },
        "worst_margin": m.worst(),
        "feasible": bool(cert.feasible),
        "m_phi": cert.m_phi,
        "res_a": cert.res_a,
        "res_b": cert.res_b,
        "p_norm": float(np.linalg.norm(cert.P, 2)),
        "P": cert.P.tolist(),
        "Q1": cert.Q1.tolist(),
        "Q2": cert.Q2.tolist(),
        "gain_source": source,
        "reference_modes": reference,
        "notes": list(cert.notes),
    }


def _certificate_from_payload(payload: dict[str, Any]) -> Certificate:
    try:
        m = payload["margins"]
        margins = CertificateMargins(
            theta1=float(m["theta1"]),
            theta2=float(m["theta2"]),
            theta3=None if m["theta3"] is None else float(m["theta3"]),
            r1=float(m["r1"]),
            r2=float(m["r2"]),
        )
        return Certificate(
            kind=CertificateKind(payload["family"]),
            N=int(payload["modes"]),
            delta=float(payload["delta"]),
            alpha=float(payload["alpha"]),
            beta=float(payload["beta"]),
            gamma=float(payload["gamma"]),
            epsilon=None if payload["epsilon"] is None else float(payload["epsilon"]),
            P=np.asarray(payload["P"], dtype=float),
            Q1=np.asarray(payload["Q1"], dtype=float),
            Q2=np.asarray(payload["Q2"], dtype=float),
            m_phi=float(payload["m_phi"]),
            res_a=float(payload["res_a"]),
            res_b=float(payload["res_b"]),
            margins=margins,
            feasible=bool(payload["feasible"]),
            notes=tuple(payload["notes"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"certificate artifact is malformed: {exc}") from exc


def _certificate_text(cert: Certificate, gains: GainSet, source: str,
                      reference: int | None) -> str:
    assert cert.margins is not None
    m = cert.margins
    lines = [
        "stability certificate",
        "=====================",
        f"family                  {cert.kind.value}",
        f"observer modes          {cert.N} ({gains.n0} corrected + {cert.N - gains.n0} residual filter)",
        f"decay target            {_fmt(cert.delta)}",
        f"alpha                   {_fmt(cert.alpha)}",
        f"beta                    {_fmt(cert.beta)}",
        f"gamma                   {_fmt(cert.gamma)}",
    ]
    if cert.epsilon is not None:
        lines.append(f"epsilon                 {_fmt(cert.epsilon)}")
    lines += [
        "",
        "margins (every entry must be <= 0)",
        f"  theta1                {m.theta1:+.6e}",
        f"  theta2                {m.theta2:+.6e}",
        "  theta3                (not applicable)" if m.theta3 is None
        else f"  theta3                {m.theta3:+.6e}",
        f"  r1                    {m.r1:+.6e}",
        f"  r2                    {m.r2:+.6e}",
        f"  worst                 {m.worst():+.6e}",
        "",
        f"|P|                     {np.linalg.norm(cert.P, 2):.6e}",
        f"|Q1|                    {np.linalg.norm(cert.Q1, 2):.6e}",
        f"|Q2|                    {np.linalg.norm(cert.Q2, 2):.6e}",
        f"tail constant           {cert.m_phi:.6e}",
        f"truncated-source norms  {cert.res_a:.6e} / {cert.res_b:.6e}",
        f"gains                   {source}",
    ]
    if reference is None:
        lines.append("reference modes         (none given)")
    else:
        lines.append(
            f"reference modes         {reference} "
            f"(this certifier: {cert.N}, gap {cert.N - reference:+d})")
    lines += ["", "notes"]
    lines += [f"  - {note}" for note in cert.notes]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# verbs


def cmd_spectrum(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _outdir(args)
    data = _analyze(cfg)
    residuals = identity_residuals(data)
    header = ["n", "eigenvalue", "phi0", "dphi0", "phi1", "dphi1",
              "source_a", "source_b", "input_beta", "identity_residual"]
    rows = [
        (n + 1, data.lam[n], data.phi0[n], data.dphi0[n], data.phi1[n],
         data.dphi1[n], data.a_n[n], data.b_n[n], data.beta_n[n], residuals[n])
        for n in range(data.n_modes)
    ]
    _write_text(out / "modes.csv", _csv_text(header, rows))
    payload = {
        "schema": "rdstab-spectrum/1",
        "measurement": cfg.plant.measurement.value,
        "modes": data.n_modes,
        "grid": data.grid_size,
        "q_c": float(data.split.q_c),
        "p_at_one": float(data.pstar),
        "lambda_first": float(data.lam[0]),
        "lambda_last": float(data.lam[-1]),
        "unstable_modes": int(np.sum(data.lam < data.split.q_c)),
        "norm_a_sq": float(data.norm_a_sq),
        "norm_b_sq": float(data.norm_b_sq),
        "max_identity_residual": float(np.max(residuals)),
    }
    _write_text(out / "spectrum.json", _json_text(payload))
    print(f"{data.n_modes} modes on a {data.grid_size}-point grid, "
          f"max source-identity residual {np.max(residuals):.3e}; "
          f"wrote modes.csv, spectrum.json")
    return 0


def _gains_payload(gains: GainSet, source: str) -> dict[str, Any]:
    return {
        "schema": "rdstab-gains/1",
        "source": source,
        "delta": gains.delta,
        "n0": gains.n0,
        "K": [float(v) for v in gains.K],
        "L": [float(v) for v in gains.L],
        "margin_ctrl": gains.margin_ctrl,
        "margin_obs": gains.margin_obs,
    }


def cmd_synthesize(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _outdir(args)
    data = _analyze(cfg)
    gains, source = _resolve_gains(cfg, data, args.given_gains)
    _write_text(out / "gains.json", _json_text(_gains_payload(gains, source)))
    print(f"{source} gains for n0 = {gains.n0}: margins "
          f"ctrl {gains.margin_ctrl:.4f}, obs {gains.margin_obs:.4f}; wrote gains.json")
    return 0


def cmd_certify(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _outdir(args)
    kind = cfg.family(args.theorem)
    data = _analyze(cfg)
    gains, source = _resolve_gains(cfg, data, args.given_gains)
    cert = find_minimal_N(cfg.plant, data, gains, kind, cfg.budget())
    reference = cfg.reference_modes.get(THEOREM_BY_FAMILY[kind])
    _write_text(out / "gains.json", _json_text(_gains_payload(gains, source)))
    _write_text(out / "certificate.json",
                _json_text(_certificate_payload(cert, gains, source, reference)))
    _write_text(out / "certificate.txt",
                _certificate_text(cert, gains, source, reference))
    against = "" if reference is None else f" (reference design: {reference})"
    print(f"feasible: family {kind.value} certified at N = {cert.N}{against}; "
          f"wrote gains.json, certificate.json, certificate.txt")
    return 0


_PLOT_SCRIPT = '''#!/usr/bin/env python3
"""Render the simulation artifacts living next to this script: the state
surface z(t, x), the observation-error surface rebuilt from the modal error
series and the sampled eigenfunctions, and the delayed input trace."""

from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent


def load(name):
    path = HERE / name
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\\n").split(",")
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, body


snap_header, snap = load("snapshots.csv")
_, control = load("control.csv")
_, err = load("modal_error.csv")
_, phi = load("eigenfunctions.csv")

t = snap[:, 0]
x = np.array([float(v) for v in snap_header[1:]])
z = snap[:, 1:]
error_surface = err[:, 1:] @ phi[:, 1:].T

fig, axes = plt.subplots(1, 3, figsize=(15.0, 4.2))
for ax, surface, label in (
    (axes[0], z, "state z(t, x)"),
    (axes[1], error_surface, "observation error (modal reconstruction)"),
):
    mesh = ax.pcolormesh(t, x, surface.T, shading="auto")
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.set_title(label)
axes[2].plot(control[:, 0], control[:, 2])
axes[2].set_xlabel("t")
axes[2].set_ylabel("delayed input")
axes[2].set_title("boundary input u(t - h)")
fig.tight_layout()
fig.savefig(HERE / "figure.png", dpi=150)
print("wrote", HERE / "figure.png")
'''


def _trajectory_files(out: Path, traj: Trajectory, data: SpectralData) -> None:
    x_header = ["t"] + [_fmt(v) for v in traj.x]
    _write_text(out / "snapshots.csv", _csv_text(
        x_header, (np.concatenate(([t], row))
                   for t, row in zip(traj.times, traj.snapshots))))
    _write_text(out / "control.csv", _csv_text(
        ["t", "u", "u_delayed"], zip(traj.times, traj.u, traj.u_delayed)))
    n_obs = traj.zhat.shape[1]
    _write_text(out / "observer.csv", _csv_text(
        ["t"] + [f"zhat_{n + 1}" for n in range(n_obs)],
        (np.concatenate(([t], row)) for t, row in zip(traj.times, traj.zhat))))
    _write_text(out / "artstein.csv", _csv_text(
        ["t"] + [f"za_{n + 1}" for n in range(traj.artstein.shape[1])],
        (np.concatenate(([t], row)) for t, row in zip(traj.times, traj.artstein))))
    _write_text(out / "modal_error.csv", _csv_text(
        ["t"] + [f"e_{n + 1}" for n in range(n_obs)],
        (np.concatenate(([t], row)) for t, row in zip(traj.times, traj.modal_error))))
    _write_text(out / "norms.csv", _csv_text(
        ["t", "l2", "h1"], zip(traj.times, traj.norms_l2, traj.norms_h1)))
    modes = np.column_stack(
        [np.interp(traj.x, data.x, data.eigvecs[:, n]) for n in range(n_obs)])
    _write_text(out / "eigenfunctions.csv", _csv_text(
        ["x"] + [f"phi_{n + 1}" for n in range(n_obs)],
        (np.concatenate(([xv], row)) for xv, row in zip(traj.x, modes))))
    _write_text(out / "plot_results.py", _PLOT_SCRIPT)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _outdir(args)
    if cfg.initial is None or cfg.horizon is None:
        raise ConfigError("simulate needs a simulate section with initial and horizon")
    data = _analyze(cfg)
    gains, source = _resolve_gains(cfg, data, args.given_gains)

    cert: Certificate | None = None
    cert_path = out / "certificate.json"
    if cert_path.exists():
        cert = _certificate_from_payload(_read_json(cert_path))
    if cfg.sim_modes is not None:
        n_obs = cfg.sim_modes
    elif cert is not None:
        n_obs = cert.N
    else:
        n_obs = gains.n0 + 1

    traj = simulate(cfg.plant, data, gains, n_obs, cfg.initial, cfg.horizon,
                    dt=cfg.dt, grid_points=cfg.sim_grid,
                    record_stride=cfg.stride, open_loop=args.open_loop)
    _trajectory_files(out, traj, data)

    window = (0.2 * cfg.horizon, 2.0 * cfg.horizon / 3.0)
    try:
        decay = float(fit_decay_rate(traj.norms_l2 ** 2, traj.times, window))
    except (ConfigError, NonPositiveData):
        decay = None
    before = traj.times < traj.delay - 1e-12
    inactive = bool(np.all(traj.u_delayed[before] == 0.0))

    ratio = None
    skipped = None
    if cert is None:
        skipped = "no certificate artifact in the output directory"
    elif args.open_loop:
        skipped = "open-loop run"
    elif cert.N != n_obs:
        skipped = f"certificate covers {cert.N} modes, simulation used {n_obs}"
    elif cert.kind.measurement is not cfg.plant.measurement:
        skipped = "certificate family does not match the plant measurement"
    else:
        v = lyapunov_diagnostic(traj, cfg.plant, data, gains, cert)
        scaled = v * np.exp(2.0 * cert.delta * traj.times)
        _write_text(out / "lyapunov.csv", _csv_text(
            ["t", "v", "v_scaled"], zip(traj.times, v, scaled)))
        keep = traj.times >= traj.delay - 1e-12
        tail = scaled[keep]
        steps = tail[1:] / tail[:-1]
        ratio = float(np.max(steps)) if steps.size else None

    payload = {
        "schema": "rdstab-simulation/1",
        "open_loop": bool(args.open_loop),
        "modes": n_obs,
        "n0": gains.n0,
        "gain_source": source,
        "delta": gains.delta,
        "delay": traj.delay,
        "dt": traj.dt,
        "horizon": cfg.horizon,
        "grid": cfg.sim_grid,
        "stride": cfg.stride,
        "decay_window": [window[0], window[1]],
        "decay_rate_l2_sq": decay,
        "u_delayed_inactive_before_delay": inactive,
        "initial_l2": float(traj.norms_l2[0]),
        "final_l2": float(traj.norms_l2[-1]),
        "lyapunov_delta": None if ratio is None else cert.delta,
        "lyapunov_max_scaled_step_ratio": ratio,
        "lyapunov_skipped": skipped,
    }
    _write_text(out / "summary.json", _json_text(payload))
    label = "open-loop" if args.open_loop else "closed-loop"
    shown = "n/a" if decay is None else f"{decay:.4f}"
    print(f"{label} run over [0, {_fmt(cfg.horizon)}] with {n_obs} observer modes: "
          f"fitted decay of the squared norm {shown}; wrote trajectory series, "
          f"plot_results.py, summary.json")
    return 0


_STAGE_VERBS = {
    "spectrum.json": "spectrum",
    "gains.json": "synthesize",
    "certificate.json": "certify",
    "summary.json": "simulate",
}


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _outdir(args)
    artifacts: dict[str, dict[str, Any]] = {}
    for name, verb in _STAGE_VERBS.items():
        path = out / name
        if not path.exists():
            raise MissingArtifact(
                f"report needs {name}; run the {verb} stage into {out} first")
        artifacts[name] = _read_json(path)
    spectrum = artifacts["spectrum.json"]
    gains = artifacts["gains.json"]
    cert = artifacts["certificate.json"]
    sim = artifacts["summary.json"]

    delta = float(gains["delta"])
    reference = cert.get("reference_modes")
    margins = cert["margins"]
    decay = sim.get("decay_rate_l2_sq")
    ratio = sim.get("lyapunov_max_scaled_step_ratio")

    lines = [
        "closed-loop verification report",
        "===============================",
        "",
        "plant",
        f"  measurement             {spectrum['measurement']}",
        f"  boundary angles         theta1 {_fmt(cfg.plant.theta1)}, theta2 {_fmt(cfg.plant.theta2)}",
        f"  input delay             {_fmt(cfg.plant.delay)}",
        "",
        "spectrum",
        f"  computed modes          {spectrum['modes']} on a {spectrum['grid']}-point grid",
        f"  reaction shift q_c      {_fmt(spectrum['q_c'])}",
        f"  open-loop unstable      {spectrum['unstable_modes']} mode(s)",
        f"  source identity         max residual {spectrum['max_identity_residual']:.3e}",
        "",
        f"gains ({gains['source']})",
        f"  decay target delta      {_fmt(delta)}",
        f"  corrected modes n0      {gains['n0']}",
        f"  K                       {gains['K']}",
        f"  L                       {gains['L']}",
        f"  abscissa margins        ctrl {gains['margin_ctrl']:.4f}, obs {gains['margin_obs']:.4f}",
        "",
        "certificate",
        f"  family                  {cert['family']} (theorem {cert['theorem']})",
        f"  certified modes         {cert['modes']}",
    ]
    if reference is None:
        lines.append("  reference modes         (none given)")
    else:
        gap = int(cert["modes"]) - int(reference)
        lines.append(f"  reference modes         {reference} (gap {gap:+d})")
    scalars = f"alpha {_fmt(cert['alpha'])}, beta {_fmt(cert['beta'])}, gamma {_fmt(cert['gamma'])}"
    if cert.get("epsilon") is not None:
        scalars += f", epsilon {_fmt(cert['epsilon'])}"
    theta3 = margins["theta3"]
    lines += [
        f"  scalars                 {scalars}",
        f"  margins                 theta1 {margins['theta1']:+.3e}, theta2 {margins['theta2']:+.3e}, "
        + ("theta3 n/a, " if theta3 is None else f"theta3 {theta3:+.3e}, ")
        + f"r1 {margins['r1']:+.3e}, r2 {margins['r2']:+.3e}",
        f"  worst margin            {cert['worst_margin']:+.6e}",
        f"  |P|                     {cert['p_norm']:.6e}",
        "  provenance notes",
    ]
    lines += [f"    - {note}" for note in cert["notes"]]

    lines += [
        "",
        "simulation" + (" (open loop)" if sim["open_loop"] else ""),
        f"  horizon / dt            {_fmt(sim['horizon'])} / {_fmt(sim['dt'])}",
        f"  observer modes          {sim['modes']}",
        f"  initial -> final |z|    {sim['initial_l2']:.6e} -> {sim['final_l2']:.6e}",
    ]
    window = sim["decay_window"]
    target = 2.0 * delta * DECAY_SLACK
    if decay is None:
        lines.append("  fitted decay            n/a (series not positive on the window)")
        decay_ok = False
    elif sim["open_loop"]:
        verdict = "growth, as expected without feedback" if decay < 0 else "unexpected decay"
        lines.append(
            f"  fitted rate of |z|^2    {decay:.4f} over [{_fmt(window[0])}, {_fmt(window[1])}] ({verdict})")
        decay_ok = decay < 0
    else:
        verdict = "meets" if decay >= target else "BELOW"
        lines.append(
            f"  fitted decay of |z|^2   {decay:.4f} over [{_fmt(window[0])}, {_fmt(window[1])}] "
            f"({verdict} the 10%-slack target {_fmt(target)} on 2 * delta)")
        decay_ok = decay >= target
    inactive = sim["u_delayed_inactive_before_delay"]
    lines.append(
        f"  input dead time         delayed input inactive before t = {_fmt(sim['delay'])}: "
        + ("yes" if inactive else "NO"))
    if ratio is None:
        reason = sim.get("lyapunov_skipped") or "not evaluated"
        lines.append(f"  scaled energy check     skipped ({reason})")
        monotone_ok = None
    else:
        monotone_ok = ratio <= MONOTONE_STEP_TOL
        lines.append(
            f"  scaled energy check     max step ratio of V e^(2 delta t) after the dead time "
            f"{ratio:.6f} ({'nonincreasing within 2%' if monotone_ok else 'VIOLATES the 2% bound'})")

    failures = []
    if not cert["feasible"]:
        failures.append("certificate infeasible")
    if not decay_ok:
        failures.append("decay target missed" if not sim["open_loop"] else "open-loop growth absent")
    if not inactive:
        failures.append("delayed input active before the dead time")
    if monotone_ok is False:
        failures.append("scaled Lyapunov series increased")
    lines += [
        "",
        "verdict",
        "  all checks passed" if not failures else "  FAILED: " + "; ".join(failures),
        "",
    ]
    _write_text(out / "report.txt", "\n".join(lines))
    print(f"wrote report.txt ({'ok' if not failures else 'failures: ' + '; '.join(failures)})")
    return 0


# ---------------------------------------------------------------------------
# entry point


def _attempts_table(exc: NotFeasibleWithinBudget) -> None:
    attempts = getattr(exc, "attempts", None) or []
    if not attempts:
        return
    print("best margins per dimension (all must be <= 0):", file=sys.stderr)
    print("    N  theta1         theta2         theta3         r1             r2",
          file=sys.stderr)
    for n, m in attempts:
        theta3 = "     --      " if m.theta3 is None else f"{m.theta3:+.6e}"
        print(f"  {n:3d}  {m.theta1:+.6e}  {m.theta2:+.6e}  {theta3}  "
              f"{m.r1:+.6e}  {m.r2:+.6e}", file=sys.stderr)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdstab",
        description="Design and verify delayed boundary feedback for "
                    "1-D reaction-diffusion plants.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, required=True,
                       help="job description (JSON)")
        p.add_argument("--out", type=Path, required=True,
                       help="artifact directory, created if absent")

    def given(p: argparse.ArgumentParser) -> None:
        p.add_argument("--given-gains", action="store_true",
                       help="use the K/L arrays from the config instead of designing")

    p = sub.add_parser("spectrum", help="compute eigenvalues, traces and modal sources")
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("synthesize", help="select n0 and place feedback and observer poles")
    common(p)
    given(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("certify", help="search for the smallest certified observer dimension")
    common(p)
    given(p)
    p.add_argument("--theorem", type=int, choices=(1, 2, 3), default=None,
                   help="certificate family: 1 = H1/Dirichlet, 2 = L2/Dirichlet, "
                        "3 = H1/Neumann (default: certify.theorem from the config)")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="run the closed loop and export trajectory series")
    common(p)
    given(p)
    p.add_argument("--open-loop", action="store_true",
                   help="force u = 0 to expose the uncontrolled dynamics")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="merge stage artifacts into one document")
    common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidPlant, MissingArtifact) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NotFeasibleWithinBudget as exc:
        print(f"error: {exc}", file=sys.stderr)
        _attempts_table(exc)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RdstabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
