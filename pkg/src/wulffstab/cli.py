"""Experiment runner: subcommand dispatch, CSV/dat emission, SVG plots.

Every run is deterministic for a fixed config and seed: randomness flows
from numpy Generators seeded per task, reductions are fixed-order, and
files are written atomically (write then rename) so failures never leave
partial CSVs behind.
"""

import argparse
import os
import sys
import tempfile

import numpy as np

from . import einstein as es
from . import spectral
from .config import ConfigError, ExperimentConfig
from .curvature import anisotropic_shape_operator, oscillation_deficit, trace_free
from .integrand import Integrand, gauge
from .spheremesh import build_sphere_mesh
from .stability import (SpectralGraphSurface, center, scaling_sweep,
                        stability_operator)
from .surface import exp_graph, projection_certificate, radial_graph
from .wulff import build_wulff

FLOAT_FMT = "%.17g"


def worker_count():
    """Worker cap from WULFFSTAB_THREADS (default 1; results never depend on it)."""
    try:
        return max(1, int(os.environ.get("WULFFSTAB_THREADS", "1")))
    except ValueError:
        return 1


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v
    return str(v)


def _atomic_write(path, text):
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(k, "")) for k in header))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_dat(path, header, rows):
    lines = ["# " + " ".join(header)]
    for row in rows:
        lines.append(" ".join(_fmt(row.get(k, "")) for k in header))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_svg(path, series, xlabel="x", ylabel="y", loglog=True):
    """Minimal polyline plot; series is a list of (name, xs, ys)."""
    W, H, pad = 640, 480, 60
    pts_all = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
               if (x > 0 and y > 0) or not loglog]
    if not pts_all:
        return
    tx = np.log10 if loglog else (lambda v: v)
    xs = [tx(p[0]) for p in pts_all]
    ys = [tx(p[1]) for p in pts_all]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 += (x1 - x0 or 1) * 0.05
    x0 -= (x1 - x0 or 1) * 0.05
    y1 += (y1 - y0 or 1) * 0.05
    y0 -= (y1 - y0 or 1) * 0.05

    def sx(v):
        return pad + (tx(v) - x0) / (x1 - x0) * (W - 2 * pad)

    def sy(v):
        return H - pad - (tx(v) - y0) / (y1 - y0) * (H - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" '
             f'height="{H - 2 * pad}" fill="none" stroke="black"/>']
    for i, (name, xs_, ys_) in enumerate(series):
        pts = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(xs_, ys_)
                       if not loglog or (x > 0 and y > 0))
        color = colors[i % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     'stroke-width="1.5"/>')
        parts.append(f'<text x="{pad + 8}" y="{pad + 18 + 16 * i}" '
                     f'fill="{color}" font-size="13">{name}</text>')
    parts.append(f'<text x="{W // 2}" y="{H - 16}" font-size="13" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="16" y="{H // 2}" font-size="13" '
                 f'transform="rotate(-90 16 {H // 2})" '
                 f'text-anchor="middle">{ylabel}</text>')
    parts.append("</svg>")
    _atomic_write(path, "\n".join(parts) + "\n")


def _sphere_or_wulff(cfg):
    if cfg.integrand.family == "constant" and cfg.integrand.params["value"] == 1.0:
        return build_sphere_mesh(cfg.level)
    return build_wulff(cfg.integrand, cfg.level)


# --- subcommands ------------------------------------------------------------


def run_wulff(cfg, outdir, svg):
    integ = cfg.integrand
    rng = np.random.default_rng((cfg.seed, 1))
    rows = []
    W = build_wulff(integ, cfg.level)
    sample = slice(None, None, max(1, W.n_vertices // 500))
    vals, grads = gauge(integ, W.vertices[sample])
    gauge_resid = float(np.abs(vals - 1.0).max())
    rows.append({"metric": "max_gauge_residual", "value": gauge_resid})
    nu = W.normals[sample]
    normal_resid = float(np.abs(grads / np.linalg.norm(grads, axis=1, keepdims=True)
                                - nu).max())
    rows.append({"metric": "max_normal_direction_residual", "value": normal_resid})
    # gauge-differential identity: F(nu) dF*|_z[c] = <nu, c>
    cs = rng.normal(size=(10, 3))
    F = integ.value(nu)
    robin = 0.0
    for c in cs:
        lhs = F * (grads @ c)
        robin = max(robin, float(np.abs(lhs - nu @ c).max() / np.abs(nu @ c).max()))
    rows.append({"metric": "robin_identity_residual", "value": robin})
    rows.append({"metric": "ellipticity_margin", "value": integ.ellipticity_margin})
    if integ.family == "quadratic":
        Minv = np.linalg.inv(integ.params["M"])
        resid = float(np.abs(np.einsum("ni,ij,nj->n", W.vertices, Minv,
                                       W.vertices) - 1.0).max())
        rows.append({"metric": "ellipsoid_closed_form_residual", "value": resid})
    areas = []
    top = max(cfg.level, 4)
    levels = [top - 2, top - 1, top]
    for lv in levels:
        areas.append(build_wulff(integ, lv).area())
    h = [build_wulff(integ, lv).edge_length() for lv in levels]
    # Richardson: area(h) = A - C h^order
    order = float(np.log((areas[1] - areas[0]) / (areas[2] - areas[1]))
                  / np.log(h[0] / h[1]))
    rows.append({"metric": "area_convergence_order", "value": order})
    rows.append({"metric": "vertex_count", "value": W.n_vertices})
    write_csv(os.path.join(outdir, "wulff.csv"), ["metric", "value"], rows)
    write_dat(os.path.join(outdir, "wulff.dat"), ["metric", "value"], rows)
    ok = gauge_resid < 1e-8 and order > 1.5
    return (0 if ok else 1), rows


def run_curvature(cfg, outdir, svg):
    sec = cfg.section("curvature")
    eps = float(sec.get("epsilon", "1e-3"))
    family = cfg.family("curvature")
    base = _sphere_or_wulff(cfg)
    from .spheremesh import SphereMesh
    from .stability import perturbation_field
    shape = perturbation_field(base, family)
    if isinstance(base, SphereMesh):
        geom = exp_graph(base, eps * shape)
    else:
        geom = radial_graph(base, eps * shape)
    cert = projection_certificate(geom)
    s_field, hf = anisotropic_shape_operator(geom, cfg.integrand)
    dev, tr = trace_free(s_field)
    report = oscillation_deficit(s_field, hf, geom.weights, cfg.p)
    rows = [
        {"metric": "epsilon", "value": eps},
        {"metric": "p", "value": cfg.p},
        {"metric": "deficit", "value": report.deficit},
        {"metric": "lambda_star", "value": report.lambda_star},
        {"metric": "oscillation", "value": report.oscillation},
        {"metric": "h_mean_over_n", "value": report.h_mean_over_n},
        {"metric": "c_osc", "value": report.c_osc},
        {"metric": "max_trace_residual", "value": float(np.abs(np.einsum("nii->n", dev.values)).max())},
        {"metric": "eta_margin", "value": cert.margin},
    ]
    write_csv(os.path.join(outdir, "curvature.csv"), ["metric", "value"], rows)
    write_dat(os.path.join(outdir, "curvature.dat"), ["metric", "value"], rows)
    # per-node geometry dump in the shared mesh text format plus CSV
    from .wulff import write_mesh_text
    write_mesh_text(os.path.join(outdir, "geometry.mesh"), geom.positions,
                    geom.normal, base.faces,
                    f"wulffstab surface level={cfg.level} family={family!r}")
    node_rows = [{"node": i, "H": geom.mean_curvature[i],
                  "eta": cert.margins[i], "radius": cert.radius[i]}
                 for i in range(geom.n_nodes)]
    write_csv(os.path.join(outdir, "geometry.csv"),
              ["node", "H", "eta", "radius"], node_rows)
    return (0 if cert.passed else 1), rows


def run_kernel(cfg, outdir, svg):
    sec = cfg.section("kernel")
    levels = cfg.ints("kernel", "levels", f"{cfg.level - 2},{cfg.level - 1},{cfg.level}")
    n_vec = int(sec.get("n_vectors", "5"))
    threshold = float(sec.get("threshold", "0.02"))
    rng = np.random.default_rng((cfg.seed, 2))
    cs = rng.normal(size=(n_vec, 3))
    cs /= np.linalg.norm(cs, axis=1, keepdims=True)
    rows = []
    bases = [("sphere", build_sphere_mesh, Integrand.constant())]
    if cfg.integrand.family != "constant":
        bases.append(("wulff", lambda lv: build_wulff(cfg.integrand, lv),
                      cfg.integrand))
    worst_final = 0.0
    decreasing = True
    for name, builder, integ in bases:
        prev = None
        for lv in levels:
            base = builder(lv)
            residuals = []
            for c in cs:
                phi = base.normals @ c
                L = stability_operator(base, integ, phi)
                r = np.sqrt(np.sum(base.weights * L ** 2)
                            / np.sum(base.weights * phi ** 2))
                residuals.append(float(r))
            worst = max(residuals)
            rows.append({"surface": name, "level": lv,
                         "max_kernel_residual": worst})
            if prev is not None and worst >= prev:
                decreasing = False
            prev = worst
            if lv == levels[-1]:
                worst_final = max(worst_final, worst)
        # eigenvalue check for the first nontrivial band on the sphere
        if name == "sphere":
            base = builder(levels[-1])
            y2 = spectral.real_sph_harm_matrix(base.vertices, 2)[:, spectral.sh_index(2, 0)]
            L = stability_operator(base, integ, y2)
            ray = float(np.sum(base.weights * L * y2) / np.sum(base.weights * y2 ** 2))
            rows.append({"surface": "sphere", "level": levels[-1],
                         "max_kernel_residual": ray, "note": "y2_rayleigh"})
    header = ["surface", "level", "max_kernel_residual", "note"]
    write_csv(os.path.join(outdir, "kernel.csv"), header, rows)
    write_dat(os.path.join(outdir, "kernel.dat"), header, rows)
    ok = worst_final <= threshold and decreasing
    return (0 if ok else 1), rows


def run_center(cfg, outdir, svg):
    sec = cfg.section("center")
    t = np.array(cfg.floats("center", "translation", "0.03,-0.02,0.028"))
    t *= float(sec.get("translation_norm", "0.05")) / np.linalg.norm(t)
    epsilons = cfg.floats("center", "epsilons", "0.01,0.02,0.04")
    mesh = build_sphere_mesh(cfg.level)
    rows = []
    # exact translated sphere re-read as an exponential graph
    s = mesh.vertices @ t
    f = np.log(s + np.sqrt(1 - t @ t + s ** 2))
    coeffs = spectral.sh_analyze(mesh, f, min(10, spectral.band_limit(mesh.n_vertices)))
    res = center(SpectralGraphSurface(mesh, coeffs, "exp"), tolerance=cfg.tolerance)
    err = float(np.linalg.norm(res.c - t))
    rows.append({"case": "translate_recovery", "epsilon": float(np.linalg.norm(t)),
                 "residual": err, "iterations": res.iterations})
    # one-step contraction on a mixed translation + quadrupole family
    rng = np.random.default_rng((cfg.seed, 3))
    that = rng.normal(size=3)
    that /= np.linalg.norm(that)
    col = spectral.sh_index(2, 0)
    y20 = spectral.real_sph_harm_matrix(mesh.vertices, 2)[:, col]
    one_step = []
    for eps in epsilons:
        fe = eps * (mesh.vertices @ that) + eps * y20
        ce = spectral.sh_analyze(mesh, fe, 10)
        r1 = center(SpectralGraphSurface(mesh, ce, "exp"),
                    tolerance=1e-15, max_iter=1)
        one_step.append(r1.trace[-1])
        rows.append({"case": "one_step", "epsilon": eps,
                     "residual": r1.trace[-1], "iterations": 1})
    slope = float(np.polyfit(np.log(epsilons), np.log(one_step), 1)[0])
    rows.append({"case": "one_step_exponent", "epsilon": 0.0,
                 "residual": slope, "iterations": len(epsilons)})
    header = ["case", "epsilon", "residual", "iterations"]
    write_csv(os.path.join(outdir, "center.csv"), header, rows)
    write_dat(os.path.join(outdir, "center.dat"), header, rows)
    if svg:
        write_svg(os.path.join(outdir, "center.svg"),
                  [("one-step residual", epsilons, one_step)],
                  xlabel="epsilon", ylabel="residual")
    ok = err <= float(sec.get("recovery_tol", "1e-4")) and res.iterations <= 10 \
        and abs(slope - 2.0) <= 0.2
    return (0 if ok else 1), rows


def run_sweep(cfg, outdir, svg):
    family = cfg.family("sweep")
    amps = cfg.amplitudes("sweep")
    base = _sphere_or_wulff(cfg)
    deficit_fit, distance_fit, rows = scaling_sweep(
        base, cfg.integrand, family, amps, cfg.p, tolerance=cfg.tolerance)
    fam_txt = (f"harmonic:{family[1]},{family[2]}" if family[0] == "harmonic"
               else "kernel:" + ",".join(FLOAT_FMT % v for v in family[1]))
    if deficit_fit is not None:
        flags = (f"deficit_slope={deficit_fit.slope:.4f};"
                 f"distance_slope={distance_fit.slope:.4f}")
    else:
        flags = "fit_unavailable"
    out_rows = []
    truncated = False
    for row in rows:
        if "warning" in row:
            truncated = True
            out_rows.append({"family": fam_txt, "epsilon": row["epsilon"],
                             "p": cfg.p, "slope_flags": row["warning"],
                             "eta_margin": row.get("eta", "")})
            continue
        out_rows.append({"family": fam_txt, "epsilon": row["epsilon"],
                         "p": cfg.p, "deficit": row["deficit"],
                         "distance": row["distance"], "ratio": row["ratio"],
                         "slope_flags": flags, "eta_margin": row["eta"],
                         "iterations": row["iterations"]})
    header = ["family", "epsilon", "p", "deficit", "distance", "ratio",
              "slope_flags", "eta_margin", "iterations"]
    write_csv(os.path.join(outdir, "sweep.csv"), header, out_rows)
    write_dat(os.path.join(outdir, "sweep.dat"), header, out_rows)
    if svg:
        good = [r for r in rows if "deficit" in r]
        write_svg(os.path.join(outdir, "sweep.svg"),
                  [("deficit", [r["epsilon"] for r in good],
                    [r["deficit"] for r in good]),
                   ("distance", [r["epsilon"] for r in good],
                    [r["distance"] for r in good])],
                  xlabel="epsilon", ylabel="measure")
    return (1 if truncated else 0), out_rows


def run_einstein(cfg, outdir, svg):
    sec = cfg.section("einstein")
    dims = cfg.ints("einstein", "dimensions", "3,4,5")
    kappas = cfg.floats("einstein", "kappas", "-1,0,1")
    budget = int(sec.get("budget", "200000"))
    rows = []
    ok = True
    for n in dims:
        for kap in kappas:
            zs = es.zero_set_check(n, kap, budget=min(budget, 10 ** 5),
                                   seed=cfg.seed)
            rb = es.ratio_bounds(n, kap, budget=budget, seed=cfg.seed,
                                 workers=worker_count())
            ok = ok and zs["passed"] and rb.c1 > 0 and np.isfinite(rb.c2)
            rows.append({
                "n": n, "kappa": kap, "c1_est": rb.c1, "c2_est": rb.c2,
                "samples": rb.samples,
                "extremizer": "|".join(FLOAT_FMT % v for v in rb.argmax),
                "zero_set": "PASS" if zs["passed"] else "FAIL",
            })
    header = ["n", "kappa", "c1_est", "c2_est", "samples", "extremizer",
              "zero_set"]
    write_csv(os.path.join(outdir, "einstein.csv"), header, rows)
    write_dat(os.path.join(outdir, "einstein.dat"), header, rows)
    return (0 if ok else 1), rows


COMMANDS = {
    "wulff": run_wulff,
    "curvature": run_curvature,
    "kernel": run_kernel,
    "center": run_center,
    "sweep": run_sweep,
    "einstein": run_einstein,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="wulffstab",
        description="Wulff-shape stability experiments at desk scale")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--svg", action="store_true",
                        help="also render SVG line plots")
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    outdir = args.out if args.out is not None else cfg.out
    os.makedirs(outdir, exist_ok=True)
    try:
        code, _ = COMMANDS[args.command](cfg, outdir, args.svg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if code != 0:
        print(f"checks failed; report in {outdir}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
