"""Command-line scenario runner.

Subcommands bind the library operations to deterministic CSV/text output:

    flow         sample a trajectory            -> CSV s,x1,x2,xi1,xi2,h,L
    action       action with winding data       -> labeled decimals
    zmatrix      det Z, sqrt det Z, eigenvalues -> labeled complex decimals
    kernel       U_0 on an x grid               -> CSV x1,x2,re,im,abs,est_error,n_points
    residual     (i a d_t - H) U_0 at a point   -> labeled decimals
    mehler       stationary point + leading term
    filtered     y0, Morse index, leading value (optionally brute-force reference)
    spectral     exact propagator value + tail estimate
    convergence  per-alpha kernel errors        -> CSV alpha,err_mehler,err_spectral
    figure       collision + ellipse trajectory CSVs for the plotting companion

Exit codes: 0 success, 2 usage error, 3 numerical-domain error (the error
class name goes to stderr).  All floats are printed with 17 significant
digits; output is byte-identical across runs and thread counts.
"""

from __future__ import annotations

import argparse
import math
import re
import sys

import numpy as np

# lets values like "-2,2,41,-2,2,41" follow an option without being
# mistaken for option strings
_NEG_VALUE = re.compile(r"^-\d[\d.,eE+-]*$")

from .errors import AbhoError
from .model import Config, PhasePoint, load_config, validate_config, wedge
from .flow import collision_time, flow, hamiltonian, vector_potential
from .action import action
from .zmat import det_z_closed, sqrt_det_z_tracked, z_eigenvalues
from .kernel import QuadratureSpec, kernel_grid, kernel_u0, pde_residual
from .stationary import (
    TestBump,
    filtered_integral_leading,
    filtered_integral_quadrature,
    mehler_leading,
    stationary_eta,
)
from .spectral import SpectralTruncation, exact_propagator, suggested_m_cap


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _fmt_c(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}i"


def _vec(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}")
    return np.array([float(parts[0]), float(parts[1])])


def _grid6(text: str):
    parts = text.split(",")
    if len(parts) != 6:
        raise argparse.ArgumentTypeError(f"expected 'x0,x1,nx,y0,y1,ny', got {text!r}")
    x0, x1, y0, y1 = float(parts[0]), float(parts[1]), float(parts[3]), float(parts[4])
    nx, ny = int(parts[2]), int(parts[5])
    if nx < 1 or ny < 1:
        raise argparse.ArgumentTypeError("grid counts must be >= 1")
    return x0, x1, nx, y0, y1, ny


def _floats(text: str):
    return [float(p) for p in text.split(",") if p]


def _emit(args, text: str) -> None:
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config_from(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    overrides = {}
    for name in ("alpha", "flux_b", "omega", "damping_B", "cutoff_eps", "order_N"):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    if overrides:
        cfg = Config(**{**cfg.__dict__, **overrides})
    return validate_config(cfg)


def _quad_from(args) -> QuadratureSpec:
    kw = {}
    if args.tail_tol is not None:
        kw["tail_tol"] = args.tail_tol
    if args.osc_points is not None:
        kw["osc_points_per_period"] = args.osc_points
    if args.max_points is not None:
        kw["max_points_per_axis"] = args.max_points
    if args.refine_tol is not None:
        kw["refine_ratio_tol"] = args.refine_tol
    return QuadratureSpec(**kw)


def _add_common(sp) -> None:
    sp.add_argument("--config", help="config file (flat key=value)")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--flux-b", dest="flux_b", type=float)
    sp.add_argument("--omega", type=float)
    sp.add_argument("--damping-B", dest="damping_B", type=float)
    sp.add_argument("--cutoff-eps", dest="cutoff_eps", type=float)
    sp.add_argument("--order-N", dest="order_N", type=int)
    sp.add_argument("-o", "--output", help="output path (default stdout)")


def _add_quad(sp) -> None:
    sp.add_argument("--tail-tol", dest="tail_tol", type=float)
    sp.add_argument("--osc-points", dest="osc_points", type=int)
    sp.add_argument("--max-points", dest="max_points", type=int)
    sp.add_argument("--refine-tol", dest="refine_tol", type=float)


def _trajectory_rows(times, p: PhasePoint, cfg: Config) -> list[str]:
    rows = ["s,x1,x2,xi1,xi2,h,L"]
    for s in times:
        st = flow(float(s), p, cfg)
        h = hamiltonian(st.x, st.xi, cfg)
        ell = wedge(st.x, st.xi - vector_potential(st.x, cfg))
        rows.append(
            ",".join(
                _fmt(v)
                for v in (s, st.x[0], st.x[1], st.xi[0], st.xi[1], float(h), float(ell))
            )
        )
    return rows


def _cmd_flow(args) -> int:
    cfg = _config_from(args)
    p = PhasePoint(args.y, args.eta)
    times = np.linspace(args.t0, args.t1, args.steps)
    _emit(args, "\n".join(_trajectory_rows(times, p, cfg)) + "\n")
    return 0


def _cmd_action(args) -> int:
    cfg = _config_from(args)
    av = action(args.t, PhasePoint(args.y, args.eta), cfg)
    _emit(args, f"S = {_fmt(av.s_value)}\nell = {av.winding_l}\nlift = {_fmt(av.arg_lift)}\n")
    return 0


def _cmd_zmatrix(args) -> int:
    cfg = _config_from(args)
    p = PhasePoint(args.y, args.eta)
    det = det_z_closed(args.t, p, cfg)
    zv = sqrt_det_z_tracked(args.t, p, cfg)
    mu1, mu2 = z_eigenvalues(args.t, p, cfg)
    _emit(
        args,
        f"det_z = {_fmt_c(det)}\nsqrt_det_z = {_fmt_c(zv.sqrt_det_z)}\n"
        f"mu1 = {_fmt_c(mu1)}\nmu2 = {_fmt_c(mu2)}\n",
    )
    return 0


def _cmd_kernel(args) -> int:
    cfg = _config_from(args)
    q = _quad_from(args)
    x0, x1, nx, y0, y1, ny = args.xgrid
    xs = [
        np.array([xv, yv])
        for xv in np.linspace(x0, x1, nx)
        for yv in np.linspace(y0, y1, ny)
    ]
    samples = kernel_grid(args.t, xs, args.y, cfg, q, threads=args.threads)
    rows = ["x1,x2,re,im,abs,est_error,n_points"]
    for xp, sm in zip(xs, samples):
        rows.append(
            ",".join(
                [
                    _fmt(xp[0]),
                    _fmt(xp[1]),
                    _fmt(sm.value.real),
                    _fmt(sm.value.imag),
                    _fmt(abs(sm.value)),
                    _fmt(sm.est_error),
                    str(sm.n_points),
                ]
            )
        )
    _emit(args, "\n".join(rows) + "\n")
    return 0


def _cmd_residual(args) -> int:
    cfg = _config_from(args)
    q = _quad_from(args)
    res = pde_residual(args.t, args.x, args.y, cfg, q, args.fd_t, args.fd_x)
    u0 = kernel_u0(args.t, args.x, args.y, cfg, q).value
    _emit(
        args,
        f"residual = {_fmt_c(res)}\nabs_residual = {_fmt(abs(res))}\n"
        f"relative = {_fmt(abs(res) / abs(u0))}\n",
    )
    return 0


def _cmd_mehler(args) -> int:
    cfg = _config_from(args)
    se = stationary_eta(args.t, args.x, args.y, cfg)
    lead = mehler_leading(args.t, args.x, args.y, cfg)
    _emit(
        args,
        f"eta_star = {_fmt(se.eta_star[0])},{_fmt(se.eta_star[1])}\n"
        f"S = {_fmt(se.s_at_star)}\nell = {se.winding_l}\n"
        f"leading = {_fmt_c(lead)}\n",
    )
    return 0


def _cmd_filtered(args) -> int:
    cfg = _config_from(args)
    rho = TestBump(args.rho_center, args.rho_radius, args.eta0, cfg)
    fl = filtered_integral_leading(args.t, args.x, args.eta0, rho, cfg)
    lines = [
        f"y0 = {_fmt(fl.y0[0])},{_fmt(fl.y0[1])}",
        f"m = {fl.index_m}",
        f"outside_support = {int(fl.outside_support)}",
        f"leading = {_fmt_c(fl.value)}",
    ]
    if args.brute:
        ref = filtered_integral_quadrature(args.t, args.x, args.eta0, rho, cfg)
        lines.append(f"brute = {_fmt_c(ref)}")
    _emit(args, "\n".join(lines) + "\n")
    return 0


def _cmd_spectral(args) -> int:
    cfg = _config_from(args)
    trunc = SpectralTruncation(n_max=args.nmax, m_abs_max=args.mmax)
    sv = exact_propagator(args.t, args.x, args.y, cfg, trunc)
    _emit(args, f"value = {_fmt_c(sv.value)}\ntail_estimate = {_fmt(sv.tail_estimate)}\n")
    return 0


def _cmd_convergence(args) -> int:
    base = _config_from(args)
    q = _quad_from(args)
    rows = ["alpha,err_mehler,err_spectral"]
    for alpha in args.alphas:
        # --flux-b pins the flux across the sweep; otherwise b = beta * alpha
        flux = base.flux_b if args.flux_b is not None else args.beta * alpha
        cfg = validate_config(Config(**{**base.__dict__, "alpha": alpha, "flux_b": flux}))
        val = kernel_u0(args.t, args.x, args.y, cfg, q).value
        lead = mehler_leading(args.t, args.x, args.y, cfg)
        mcap = suggested_m_cap(args.t, args.x, args.y, cfg)
        sv = exact_propagator(
            args.t, args.x, args.y, cfg, SpectralTruncation(n_max=0, m_abs_max=mcap)
        )
        rows.append(
            ",".join(
                [
                    _fmt(alpha),
                    _fmt(abs(val - lead) / abs(lead)),
                    _fmt(abs(val - sv.value) / abs(sv.value)),
                ]
            )
        )
    _emit(args, "\n".join(rows) + "\n")
    return 0


def _cmd_figure(args) -> int:
    cfg = _config_from(args)
    y = args.y
    eta = args.eta
    # elliptic orbit: one full period
    p_ell = PhasePoint(y, eta)
    times = np.linspace(0.0, 2 * math.pi / cfg.omega, args.steps)
    ell_rows = _trajectory_rows(times, p_ell, cfg)
    # radial collision orbit: project eta onto the manifold y ^ eta = b
    shift = (cfg.flux_b - float(wedge(y, eta))) / float(y @ y)
    eta_c = eta + shift * np.array([-y[1], y[0]])
    p_col = PhasePoint(y, eta_c)
    t_c = collision_time(p_col, cfg)
    times_c = np.linspace(0.0, t_c * (1.0 - 1e-9), args.steps)
    col_rows = _trajectory_rows(times_c, p_col, cfg)

    for suffix, rows in (("collision", col_rows), ("ellipse", ell_rows)):
        path = f"{args.out_prefix}_{suffix}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(rows) + "\n")
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="abho",
        description="Semiclassical propagator of the 2D harmonic oscillator "
        "in an Aharonov-Bohm flux",
    )
    ap._negative_number_matcher = _NEG_VALUE
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("flow", help="sample a classical trajectory")
    _add_common(sp)
    sp.add_argument("--t0", type=float, required=True)
    sp.add_argument("--t1", type=float, required=True)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--y", type=_vec, required=True)
    sp.add_argument("--eta", type=_vec, required=True)
    sp.set_defaults(func=_cmd_flow)

    sp = sub.add_parser("action", help="action with winding data")
    _add_common(sp)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--y", type=_vec, required=True)
    sp.add_argument("--eta", type=_vec, required=True)
    sp.set_defaults(func=_cmd_action)

    sp = sub.add_parser("zmatrix", help="det Z, its square root and eigenvalues")
    _add_common(sp)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--y", type=_vec, required=True)
    sp.add_argument("--eta", type=_vec, required=True)
    sp.set_defaults(func=_cmd_zmatrix)

    sp = sub.add_parser("kernel", help="U_0 on an x grid")
    _add_common(sp)
    _add_quad(sp)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--y", type=_vec, required=True)
    sp.add_argument("--xgrid", type=_grid6, required=True, help="x0,x1,nx,y0,y1,ny")
    sp.add_argument("--threads", type=int, default=None)
    sp.set_defaults(func=_cmd_kernel)

    sp = sub.add_parser("residual", help="PDE residual at one point")
    _add_common(sp)
    _add_quad(sp)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--x", type=_vec, required=True)
    sp.add_argument("--y", type=_vec, required=True)
    sp.add_argument("--fd-t", dest="fd_t", type=float, default=1e-5)
    sp.add_argument("--fd-x", dest="fd_x", type=float, default=1e-3)
    sp.set_defaults(func=_cmd_residual)

    sp = sub.add_parser("mehler", help="stationary point and leading term")
    _add_common(sp)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--x", type=_vec, required=True)
    sp.add_argument("--y", type=_vec, required=True)
    sp.set_defaults(func=_cmd_mehler)

    sp = sub.add_parser("filtered", help="filtered integral leading value")
    _add_common(sp)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--x", type=_vec, required=True)
    sp.add_argument("--eta0", type=_vec, required=True)
    sp.add_argument("--rho-center", dest="rho_center", type=_vec, required=True)
    sp.add_argument("--rho-radius", dest="rho_radius", type=float, required=True)
    sp.add_argument("--brute", action="store_true", help="also run the 4D quadrature")
    sp.set_defaults(func=_cmd_filtered)

    sp = sub.add_parser("spectral", help="exact spectral propagator")
    _add_common(sp)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--x", type=_vec, required=True)
    sp.add_argument("--y", type=_vec, required=True)
    sp.add_argument("--nmax", type=int, default=60)
    sp.add_argument("--mmax", type=int, default=60)
    sp.set_defaults(func=_cmd_spectral)

    sp = sub.add_parser("convergence", help="per-alpha error sweep")
    _add_common(sp)
    _add_quad(sp)
    sp.add_argument("--alphas", type=_floats, required=True)
    sp.add_argument("--beta", type=float, default=0.5, help="flux ratio b/alpha")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--x", type=_vec, required=True)
    sp.add_argument("--y", type=_vec, required=True)
    sp.set_defaults(func=_cmd_convergence)

    sp = sub.add_parser("figure", help="trajectory CSVs for the plotting companion")
    _add_common(sp)
    sp.add_argument("--y", type=_vec, default=np.array([1.0, 0.0]))
    sp.add_argument("--eta", type=_vec, default=np.array([0.4, 1.2]))
    sp.add_argument("--steps", type=int, default=1000)
    sp.add_argument("--out-prefix", dest="out_prefix", required=True)
    sp.set_defaults(func=_cmd_figure)

    for child in sub.choices.values():
        child._negative_number_matcher = _NEG_VALUE
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AbhoError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
