"""Batch front-end: build fixtures, run suites, integrate profiles, emit reports.

Subcommands: ``verify``, ``build-dwp``, ``scan-radius``, ``list-identities``.
Configuration comes from an optional JSON file plus command-line overrides
(precedence: command line > file > defaults).  Output is deterministic:
identical configuration produces byte-identical reports (no timestamps
unless ``--timestamp`` is given).

Exit codes: 0 all applicable identities pass; 1 verification failure;
2 configuration error; 3 construction failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import constructors, dwp, fields, verifier
from .constructors import ConstructionError
from .dwp import GaugeError

FIXTURES = ("flat", "s2", "product3d", "s2xr2_plus", "s2xr2_minus",
            "s2xr2_aeta_zero", "dwp")
SUITES = ("S1", "S2", "S3", "S4")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Verification run configuration; field names match the JSON schema."""

    fixture: str = "flat"
    grid: object = 5
    h: float = 1e-3
    deriv_mode: str = "analytic"
    tolerances: dict = field(default_factory=dict)
    dwp: dict = field(default_factory=lambda: {
        "K_hat": 4.0, "tau_hat": 1.0, "rho0": 0.3, "sigma0": 1.0,
        "t_span": [0.0, 0.5], "step": 1e-3})
    suites: list = field(default_factory=lambda: ["S1"])
    output: str = None
    corrupt: str = None
    timestamp: bool = False

    def validate(self):
        if self.fixture not in FIXTURES:
            raise ConfigError(f"unknown fixture {self.fixture!r}; choose from {FIXTURES}")
        for s in self.suites:
            if s not in SUITES:
                raise ConfigError(f"unknown suite {s!r}")
        counts = self.grid if isinstance(self.grid, (list, tuple)) else [self.grid]
        if any(int(c) < 3 for c in counts):
            raise ConfigError("grid counts must be >= 3 per axis")
        if self.h <= 0:
            raise ConfigError("h must be positive")
        if self.deriv_mode not in ("analytic", "fd"):
            raise ConfigError("deriv_mode must be 'analytic' or 'fd'")
        if self.fixture == "dwp":
            need = {"K_hat", "tau_hat", "rho0", "sigma0", "t_span", "step"}
            missing = need - set(self.dwp)
            if missing:
                raise ConfigError(f"dwp parameters missing: {sorted(missing)}")


def load_config(args):
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        for key, val in data.items():
            if not hasattr(cfg, key):
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, val)
    for key in ("fixture", "h", "deriv_mode", "output", "corrupt"):
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "grid", None):
        parts = str(args.grid).split(",")
        cfg.grid = int(parts[0]) if len(parts) == 1 else [int(p) for p in parts]
    if getattr(args, "suites", None):
        cfg.suites = [s.strip() for s in args.suites.split(",")]
    if getattr(args, "tolerance", None):
        for item in args.tolerance:
            key, _, val = item.partition("=")
            if not val:
                raise ConfigError(f"bad tolerance override {item!r}; use ID=value")
            cfg.tolerances[key] = float(val)
    for key in ("K_hat", "tau_hat", "rho0", "sigma0", "step"):
        val = getattr(args, "dwp_" + key.lower(), None)
        if val is not None:
            cfg.dwp[key] = val
    if getattr(args, "dwp_t_span", None):
        lo, _, hi = args.dwp_t_span.partition(":")
        cfg.dwp["t_span"] = [float(lo), float(hi)]
    if getattr(args, "timestamp", False):
        cfg.timestamp = True
    cfg.validate()
    return cfg


# ----------------------------------------------------------------------------
# fixture construction
# ----------------------------------------------------------------------------

def flow_for(k_hat, tau_hat, h):
    s = 2.0 / np.sqrt(k_hat)
    r = abs(tau_hat) * s * s
    return dwp.berger_flow(r, s, flip_eta=(tau_hat < 0), h=h)


def build_fixture(cfg):
    h = cfg.h
    name = cfg.fixture
    if name == "flat":
        cand = constructors.build_flat_parallel(h=h)
    elif name == "s2":
        cand = constructors.build_s2_skew_killing(h=h)
    elif name == "product3d":
        c2 = constructors.build_s2_skew_killing(h=h)
        cand = constructors.build_product_3d(constructors.extend_to_3d(c2))
    elif name == "s2xr2_plus":
        cand = constructors.build_s2xr2("plus", "aeta_nonzero", h=h)
    elif name == "s2xr2_minus":
        cand = constructors.build_s2xr2("minus", "aeta_nonzero", h=h)
    elif name == "s2xr2_aeta_zero":
        cand = constructors.build_s2xr2("plus", "aeta_zero", h=h)
    elif name == "dwp":
        p = cfg.dwp
        profile = dwp.integrate_dwp(p["K_hat"], p["tau_hat"], p["rho0"], p["sigma0"],
                                    tuple(p["t_span"]), p["step"])
        flow = flow_for(p["K_hat"], p["tau_hat"], h)
        cand = dwp.build_dwp_candidate(profile, flow, h=h)
    else:
        raise ConfigError(f"unknown fixture {name!r}")
    if cfg.corrupt:
        kind, _, val = cfg.corrupt.partition(":")
        if kind == "A":
            cand = constructors.corrupt_candidate(cand, a_scale=float(val))
        elif kind == "psi":
            cand = constructors.corrupt_candidate(cand, psi_eps=float(val))
        else:
            raise ConfigError(f"unknown corruption {cfg.corrupt!r}; use A:<scale> or psi:<eps>")
    if cfg.deriv_mode == "fd":
        cand = as_fd_candidate(cand)
    return cand


def as_fd_candidate(cand):
    """Verification view of a candidate with finite-difference metric derivatives."""
    chart = replace(cand.chart, metric_d1=None, metric_d2=None)
    out = fields.Candidate(chart, cand.A, cand.psi, normalized=cand.normalized,
                           name=cand.name, meta=dict(cand.meta))
    flow = out.meta.get("flow")
    if flow is not None:
        chart3 = replace(flow.chart, metric_d1=None, metric_d2=None)
        out.meta["flow"] = dwp.FlowData(flow.r, flow.s, chart3, flow.eta_coord,
                                        flow.tau_hat, flow.K_hat, flow.checks)
    return out


def grid_for(cand, cfg):
    counts = cfg.grid
    if not isinstance(counts, (list, tuple)):
        counts = (int(counts),) * cand.chart.dim
    if len(counts) != cand.chart.dim:
        raise ConfigError(f"grid needs {cand.chart.dim} counts, got {len(counts)}")
    return cand.chart.grid(tuple(int(c) for c in counts))


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------

def _s2d_report(cand, cfg):
    """2-dimensional construction checks in the ResidualReport schema."""
    grid = cand.chart.grid(cfg.grid if np.isscalar(cfg.grid) else tuple(cfg.grid))
    worst, arg = 0.0, None
    for x in grid:
        r = float(np.max(fields.skew_killing_residual(cand, x)))
        if r > worst or arg is None:
            worst, arg = r, [float(v) for v in x]
    flat = constructors.modified_flatness_residual(cand, grid[:: max(1, len(grid) // 16)])
    loop_res = constructors.transport_loop_residual(cand)
    tol_k0 = cfg.tolerances.get("K0-2d", 5e-5)
    tol_flat = cfg.tolerances.get("FLAT", 5e-4 if cfg.deriv_mode == "fd" else 1e-8)
    ids = [
        verifier.IdentityReport("K0-2d", "nabla_X psi = A X . psi (2-dim)",
                                worst, arg, len(grid), tol_k0, worst <= tol_k0),
        verifier.IdentityReport("FLAT", "modified connection curvature = 0",
                                flat, None, len(grid), tol_flat, flat <= tol_flat),
        verifier.IdentityReport("LOOP", "transport around loops is trivial",
                                loop_res, None, 1, 1e-8, loop_res <= 1e-8),
    ]
    return verifier.ResidualReport("S2D", ids, {
        "candidate": cand.name, "chart": cand.chart.name, "h": cand.chart.h,
        "deriv_mode": cfg.deriv_mode, "grid_points": int(len(grid))})


def cmd_verify(args):
    cfg = load_config(args)
    try:
        cand = build_fixture(cfg)
    except (ConstructionError, GaugeError) as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return 3
    if cand.chart.dim == 2:
        reports = [_s2d_report(cand, cfg)]
    else:
        grid = grid_for(cand, cfg)
        reports = [verifier.run_suite(cand, s, grid, tol_overrides=cfg.tolerances)
                   for s in cfg.suites]
    ok = all(r.passed for r in reports)
    for r in reports:
        r.meta["status"] = "pass" if r.passed else "fail"
        if cfg.timestamp:
            r.meta["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        print(r)
    payload = reports[0].to_dict() if len(reports) == 1 \
        else [r.to_dict() for r in reports]
    text = json.dumps(payload, indent=2)
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text + "\n")
        print(f"report written to {cfg.output}")
    return 0 if ok else 1


def cmd_build_dwp(args):
    cfg = load_config(args)
    p = cfg.dwp
    try:
        profile = dwp.integrate_dwp(p["K_hat"], p["tau_hat"], p["rho0"], p["sigma0"],
                                    tuple(p["t_span"]), p["step"])
    except ValueError as exc:
        print(f"bad profile parameters: {exc}", file=sys.stderr)
        return 2
    r1, r2 = dwp.sol_residuals(profile)
    print(f"profile: {len(profile.t)} samples, exit = {profile.exit}, "
          f"span = [{profile.t[0]:g}, {profile.t[-1]:g}], "
          f"equation residuals = {r1:.2e}, {r2:.2e}")
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(profile.to_json() + "\n")
        print(f"profile written to {cfg.output}")
    if getattr(args, "emit_table", None):
        with open(args.emit_table, "w") as fh:
            fh.write("t\trho\tsigma\ttau\tK\n")
            for row in zip(profile.t, profile.rho, profile.sigma,
                           profile.tau, profile.K):
                fh.write("\t".join(f"{v:.12g}" for v in row) + "\n")
        print(f"table written to {args.emit_table}")
    if not getattr(args, "with_candidate", False):
        return 0 if max(r1, r2) <= verifier.TOLERANCES["ode"] else 1
    try:
        flow = flow_for(p["K_hat"], p["tau_hat"], cfg.h)
        cand = dwp.build_dwp_candidate(profile, flow, h=cfg.h)
    except (ConstructionError, GaugeError) as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return 3
    if cfg.deriv_mode == "fd":
        cand = as_fd_candidate(cand)
    grid = grid_for(cand, cfg)
    ok = True
    for s in cfg.suites:
        rep = verifier.run_suite(cand, s, grid, tol_overrides=cfg.tolerances)
        print(rep)
        ok = ok and rep.passed
    return 0 if ok else 1


def cmd_scan_radius(args):
    lo, hi, n = 0.3, 0.8, 26
    if args.range:
        parts = args.range.split(":")
        if len(parts) != 3:
            print("bad --range; use lo:hi:n", file=sys.stderr)
            return 2
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    rows = constructors.scan_sphere_flatness(np.linspace(lo, hi, n))
    print("radius\tflatness")
    for r, res in rows:
        print(f"{r:.6g}\t{res:.6e}")
    best = min(rows, key=lambda t: t[1])
    print(f"minimum at radius {best[0]:.6g} (residual {best[1]:.3e})")
    if args.output:
        with open(args.output, "w") as fh:
            fh.write("radius\tflatness\n")
            for r, res in rows:
                fh.write(f"{r:.12g}\t{res:.12e}\n")
    return 0


def cmd_list_identities(args):
    for e in verifier.CATALOG:
        print(f"{e.id:12s} {e.suite:3s} tol={e.tolerance:.0e}  {e.anchor}")
    return 0


def make_parser():
    ap = argparse.ArgumentParser(prog="skewspin",
                                 description="skew Killing spinor laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (RunConfig schema)")
        p.add_argument("--fixture", choices=FIXTURES)
        p.add_argument("--grid", help="per-axis counts, e.g. 5 or 5,5,4,4")
        p.add_argument("--h", type=float, help="finite-difference step")
        p.add_argument("--deriv-mode", dest="deriv_mode", choices=("analytic", "fd"))
        p.add_argument("--suites", help="comma-separated subset of S1,S2,S3,S4")
        p.add_argument("--tolerance", action="append",
                       help="per-identity override, e.g. K0=1e-4")
        p.add_argument("--output", help="report/profile output path")
        p.add_argument("--corrupt", help="A:<scale> or psi:<eps>")
        p.add_argument("--timestamp", action="store_true")
        for key in ("K_hat", "tau_hat", "rho0", "sigma0", "step"):
            p.add_argument(f"--dwp-{key.replace('_', '-').lower()}",
                           dest="dwp_" + key.lower(), type=float)
        p.add_argument("--dwp-t-span", dest="dwp_t_span", help="lo:hi")

    pv = sub.add_parser("verify", help="build a fixture and run suites")
    common(pv)
    pv.set_defaults(fn=cmd_verify)

    pb = sub.add_parser("build-dwp", help="integrate a profile, optionally verify")
    common(pb)
    pb.add_argument("--with-candidate", action="store_true",
                    help="also build the candidate and run the suites")
    pb.add_argument("--emit-table", help="write a TSV (t, rho, sigma, tau, K)")
    pb.set_defaults(fn=cmd_build_dwp)

    ps = sub.add_parser("scan-radius",
                        help="flatness of the modified connection vs sphere radius")
    ps.add_argument("--range", help="lo:hi:n (default 0.3:0.8:26)")
    ps.add_argument("--output", help="TSV output path")
    ps.set_defaults(fn=cmd_scan_radius)

    pl = sub.add_parser("list-identities", help="print the identity catalog")
    pl.set_defaults(fn=cmd_list_identities)
    return ap


def main(argv=None):
    ap = make_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
