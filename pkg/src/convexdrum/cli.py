"""Command-line entry point.

Every subcommand writes ``report.json`` (plus CSV/SVG artifacts) into the
output directory and exits 0 iff every invariant check in the report passes.
Exit 1 flags a failed check, 2 a configuration error and 3 an error raised by
one of the numerical modules (reported with the module name).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ConvexDrumError
from .geometry import (ConvexShape, area_centroid, decompose_boundary, load_shape, save_shape,
                       synthesize)
from .meshing import UNIFORM, Grading, triangulate
from .reporting import Report, RunConfig, load_config, render_svg

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_MODULE = 0, 1, 2, 3

OBJECTIVE_NAMES = {"lambda2-convex": "lambda2_convex", "lambda1-in-strip": "lambda1_in_strip",
                   "energy-in-strip": "energy_in_strip"}

DEFAULTS = {
    "eigs": {"shape": "disk", "k": 3, "h": 0.03, "degree": 2, "grading": 1.0, "residual_tol": 1e-8},
    "poisson": {"shape": "disk", "h": 0.03, "degree": 2, "grading": 1.0},
    "optimize": {"objective": "lambda2-convex", "v0": 1.0, "strip_m": 0.4, "n_vertices": 128,
                 "max_iter": 200, "refine_vertices": 384, "refine_iter": 250, "h": 0.04, "degree": 2,
                 "grading": 1 / 64, "gtol": 1e-4, "initial": ""},
    "stadium-scan": {"v0": 1.0, "samples": 12, "ratio_min": 0.0, "ratio_max": 2.0, "n_vertices": 512,
                     "h": 0.03, "degree": 2},
    "conformal": {"shape": "disk", "n": 1024, "tol": 1e-12, "relaxation": 0.5, "transport": False,
                  "h": 0.04, "grading": 1 / 64},
    "mixed-demo": {"a0": 1.0, "a1": 0.0, "smooth": True, "resolution": 64, "radius": 1.0},
    "analyze": {"shape": "disk", "h": 0.04, "degree": 2, "grading": 1 / 64, "conformal_n": 16384,
                "conformal": True},
    "render": {"shape": "disk", "overlay": "none", "h": 0.04, "grading": 1 / 64, "name": "shape.svg"},
}


# ---------------------------------------------------------------------------
# helpers


def parse_shape(text: str) -> ConvexShape:
    """A shape file (CSV or JSON) or ``kind[:key=value,...]`` for a synthetic shape."""
    p = Path(text)
    if p.suffix.lower() in (".csv", ".json") or p.exists():
        return load_shape(p)
    kind, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, _, value = item.partition("=")
        try:
            params[key.strip()] = int(value) if value.strip().lstrip("-").isdigit() else float(value)
        except ValueError as exc:
            raise ConfigError(f"bad shape parameter {item!r}") from exc
    return synthesize(kind.strip(), **params)


def _grading(ratio: float) -> Grading:
    return UNIFORM if ratio >= 1 else Grading.junction_graded(ratio)


def _mesh(shape, cfg):
    return triangulate(shape, cfg["h"] * np.sqrt(area_centroid(shape)[0]), _grading(cfg["grading"]))


def _edge_flux(shape, sol, which):
    from .spectral import polygon_flux

    q = np.abs(polygon_flux(sol, which, shape))
    return 0.5 * (q + np.roll(q, -1))


# ---------------------------------------------------------------------------
# subcommands


def cmd_eigs(cfg: RunConfig, rep: Report) -> None:
    from .spectral import boundary_flux, solve_eigs

    p = cfg.params
    shape = parse_shape(p["shape"])
    mesh = _mesh(shape, p)
    sol = solve_eigs(mesh, p["k"], p["degree"], tol=p["residual_tol"])
    area = area_centroid(shape)[0]
    lam = sol.eigenvalues
    rep.results.update({"eigenvalues": lam.tolist(), "area": area, "scaled": (area * lam).tolist(),
                        "residuals": sol.residuals.tolist(), "n_triangles": mesh.n_triangles,
                        "min_angle": mesh.min_angle()})
    rep.check("residuals", np.all(sol.residuals <= p["residual_tol"]))
    rep.check("positive_sorted", np.all(lam > 0) and np.all(np.diff(lam) >= -1e-12 * lam[-1]))
    (cfg.output_dir / "flux.csv").write_text(boundary_flux(sol, 0).to_csv())
    rep.files.append("flux.csv")


def cmd_poisson(cfg: RunConfig, rep: Report) -> None:
    from .spectral import boundary_flux, solve_poisson

    p = cfg.params
    shape = parse_shape(p["shape"])
    mesh = _mesh(shape, p)
    sol = solve_poisson(mesh, p["degree"])
    area = area_centroid(shape)[0]
    flux = boundary_flux(sol)
    outflow = -flux.integrate()
    rep.results.update({"energy": sol.energy, "energy_quadratic": sol.energy_quadratic, "area": area,
                        "scaled_energy": sol.energy / area ** 2, "outflow": outflow,
                        "n_triangles": mesh.n_triangles})
    rep.check("energy_negative", sol.energy < 0)  # ½∫|∇u|² - ∫u at the minimizer
    rep.check("energy_identity", abs(sol.energy - sol.energy_quadratic) <= 1e-8 * abs(sol.energy))
    rep.check("divergence_theorem", abs(outflow - area) <= 1e-6 * area)
    (cfg.output_dir / "flux.csv").write_text(flux.to_csv())
    rep.files.append("flux.csv")


def cmd_optimize(cfg: RunConfig, rep: Report) -> None:
    from .geometry import disk
    from .regularity_analysis import analyze_junctions, check_overdetermined, wall_contact_report
    from .shape_opt import (OptimizationProblem, asymmetry, free_boundary_components, optimize,
                            wall_contact_angles)

    p = cfg.params
    if p["objective"] not in OBJECTIVE_NAMES:
        raise ConfigError(f"objective must be one of {', '.join(OBJECTIVE_NAMES)}")
    objective = OBJECTIVE_NAMES[p["objective"]]
    strip = objective != "lambda2_convex"
    prob = OptimizationProblem(objective=objective, V0=p["v0"], strip_M=p["strip_m"] if strip else None,
                               h=p["h"], degree=p["degree"], grading=_grading(p["grading"]),
                               n_vertices=p["n_vertices"], max_iter=p["max_iter"], gtol=p["gtol"],
                               seed=cfg.seed, refine_vertices=p["refine_vertices"],
                               refine_iter=p["refine_iter"])
    if p["initial"]:
        init = parse_shape(p["initial"])
    elif strip:
        d = disk(128, p["v0"])
        init = ConvexShape(d.vertices * np.array([1.6, 0.6]))
    else:
        init = disk(64, p["v0"])
    trace = optimize(prob, init)
    shape = trace.final_shape
    out = cfg.output_dir
    (out / "trace.csv").write_text(trace.to_csv())
    save_shape(shape, out / "shape.csv")
    dec = decompose_boundary(shape)
    junctions = analyze_junctions(shape, dec)
    (out / "junctions.json").write_text(junctions.to_json() + "\n")
    (out / "junctions.csv").write_text(junctions.to_csv())
    rep.files += ["trace.csv", "shape.csv", "junctions.json", "junctions.csv"]
    area = area_centroid(shape)[0]
    rep.results.update({"objective": trace.records[-1].objective, "termination": trace.termination,
                        "iterations": len(trace.records), "area": area, "n_vertices": shape.n,
                        "n_flat_runs": len(dec.flat_runs), "n_junctions": len(dec.junctions),
                        "gap": trace.final_state.gap, "asymmetry": asymmetry(shape),
                        "junction_alphas": junctions.alphas})
    if objective != "energy_in_strip" and dec.strictly_convex_arcs:
        od = check_overdetermined(shape, trace.final_state.solution, dec, which=prob.eigen_index)
        (out / "overdetermined.json").write_text(od.to_json() + "\n")
        rep.files.append("overdetermined.json")
        rep.results["overdetermined"] = od.as_dict()
    if strip:
        rep.results["free_boundary_components"] = free_boundary_components(shape, prob.strip_M)
        rep.results["vertex_contact_angles_deg"] = wall_contact_angles(shape, prob.strip_M).tolist()
        rep.results["wall_contacts"] = wall_contact_report(shape, prob.strip_M, dec)
        rep.check("inside_strip", np.all(np.abs(shape.vertices[:, 1]) <= prob.strip_M * (1 + 1e-9)))
    vals = np.array([r.objective for r in trace.records])
    epochs = np.cumsum([r.remeshed for r in trace.records])
    mono = all(np.all(np.diff(vals[epochs == e]) <= 1e-12 * abs(vals[0])) for e in np.unique(epochs))
    rep.check("area_preserved", abs(area - p["v0"]) <= 1e-9 * p["v0"])
    rep.check("monotone_epochs", mono)
    rep.check("shape_valid", True)  # ConvexShape construction validates convexity


def cmd_stadium_scan(cfg: RunConfig, rep: Report) -> None:
    from .shape_opt import stadium_scan

    p = cfg.params
    scan = stadium_scan(p["v0"], p["samples"], (p["ratio_min"], p["ratio_max"]), p["n_vertices"],
                        p["h"], p["degree"])
    (cfg.output_dir / "stadium_scan.csv").write_text(scan.to_csv())
    save_shape(scan.best_shape, cfg.output_dir / "best_stadium.csv")
    rep.files += ["stadium_scan.csv", "best_stadium.csv"]
    rep.results.update({"best_ratio": scan.best_ratio, "best_value": scan.best_value,
                        "error_bar": scan.error_bar, "unimodal": scan.is_unimodal()})
    rep.check("finite_values", np.all(np.isfinite(scan.values)))


def cmd_conformal(cfg: RunConfig, rep: Report) -> None:
    from .conformal import flat_run_argument_spread, map_to, transport_check

    p = cfg.params
    shape = parse_shape(p["shape"])
    cmap = map_to(shape, p["n"], p["relaxation"], p["tol"])
    (cfg.output_dir / "map.csv").write_text(cmap.to_csv())
    rep.files.append("map.csv")
    area = area_centroid(shape)[0]
    dec = decompose_boundary(shape)
    rep.results.update({"iterations": cmap.iterations, "contraction": cmap.contraction,
                        "dphi0": cmap.dphi0, "conjugacy_residual": cmap.conjugacy_residual(),
                        "boundary_defect": cmap.boundary_defect(), "tangent_defect": cmap.tangent_defect(),
                        "image_area": cmap.image_area(), "area": area,
                        "flat_run_arg_spread": flat_run_argument_spread(cmap, dec)})
    rep.check("monotone_correspondence", cmap.is_monotone())
    rep.check("on_boundary", cmap.boundary_defect() <= 1e-10 * shape.diameter)
    rep.check("tangent_identity", cmap.tangent_defect() <= 1e-10)
    if p["transport"]:
        from .spectral import solve_eigs

        sol = solve_eigs(_mesh(shape, p), 3)
        Lam = float(np.sqrt(sol.eigenvalues[1] / area))
        rep.results["transport"] = transport_check(cmap, sol, 1, Lam, dec)


def cmd_mixed_demo(cfg: RunConfig, rep: Report) -> None:
    from .mixed_bvp import boundary_residual, extract_singular, manufactured, solve_mixed

    p = cfg.params
    smooth = (lambda z: 0.3 + 0.2 * z - 0.1 * z ** 2) if p["smooth"] else None
    prob, exact = manufactured(p["a0"], p["a1"], smooth, p["radius"])
    sol = solve_mixed(prob, p["resolution"])
    ex = extract_singular(sol)
    (cfg.output_dir / "expansion.json").write_text(ex.to_json() + "\n")
    (cfg.output_dir / "field.csv").write_text(sol.field.to_csv())
    rep.files += ["expansion.json", "field.csv"]
    r, phi = sol.field.radii[:, None], sol.field.phi[None, :]
    err = float(np.max(np.abs(sol.field.values - exact(r, phi))))
    rep.results.update({"expansion": ex.as_dict(), "field_error": err, "boundary_residual": boundary_residual(sol)})
    rep.check("boundary_residual", boundary_residual(sol) <= 1e-8 * max(1.0, ex.field_scale))


def cmd_analyze(cfg: RunConfig, rep: Report) -> None:
    from .conformal import map_to
    from .regularity_analysis import analyze_junctions, check_overdetermined, junction_conformal_check
    from .spectral import solve_eigs

    p = cfg.params
    shape = parse_shape(p["shape"])
    dec = decompose_boundary(shape)
    junctions = analyze_junctions(shape, dec)
    (cfg.output_dir / "junctions.json").write_text(junctions.to_json() + "\n")
    (cfg.output_dir / "junctions.csv").write_text(junctions.to_csv())
    rep.files += ["junctions.json", "junctions.csv"]
    rep.results.update({"n_flat_runs": len(dec.flat_runs), "n_junctions": len(dec.junctions),
                        "junction_alphas": junctions.alphas})
    if dec.strictly_convex_arcs:
        sol = solve_eigs(triangulate(shape, p["h"] * np.sqrt(area_centroid(shape)[0]), _grading(p["grading"]), dec),
                         3, p["degree"])
        od = check_overdetermined(shape, sol, dec)
        rep.results["overdetermined"] = od.as_dict()
    if p["conformal"] and dec.junctions:
        cmap = map_to(shape, p["conformal_n"])
        rep.results["conformal_junctions"] = [e.as_dict() for e in junction_conformal_check(cmap, shape, dec)]
    rep.check("decomposition_consistent", 2 * len(dec.flat_runs) >= len(dec.junctions))


def cmd_render(cfg: RunConfig, rep: Report) -> None:
    from .regularity_analysis import curvature

    p = cfg.params
    shape = parse_shape(p["shape"])
    overlay, label = None, ""
    if p["overlay"] == "flux":
        from .spectral import solve_eigs

        sol = solve_eigs(_mesh(shape, p), 3)
        overlay, label = _edge_flux(shape, sol, 1), "|du2/dn|"
    elif p["overlay"] == "curvature":
        k = curvature(shape.vertices)
        overlay, label = 0.5 * (k + np.roll(k, -1)), "curvature"
    elif p["overlay"] != "none":
        raise ConfigError("overlay must be none, flux or curvature")
    svg = render_svg(shape, overlay, label)
    (cfg.output_dir / p["name"]).write_text(svg)
    rep.files.append(p["name"])
    dec = decompose_boundary(shape)
    rep.results.update({"n_flat_runs": len(dec.flat_runs), "n_junctions": len(dec.junctions)})
    rep.check("svg_written", svg.startswith("<svg"))


COMMANDS = {"eigs": cmd_eigs, "poisson": cmd_poisson, "optimize": cmd_optimize,
            "stadium-scan": cmd_stadium_scan, "conformal": cmd_conformal, "mixed-demo": cmd_mixed_demo,
            "analyze": cmd_analyze, "render": cmd_render}


# ---------------------------------------------------------------------------
# argument parsing


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convexdrum", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, defaults in DEFAULTS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--output-dir", dest="output_dir")
        sp.add_argument("--seed", type=int)
        for key, value in defaults.items():
            kind = _bool if isinstance(value, bool) else type(value)
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=kind, default=None,
                            help=f"default {value!r}")
    return parser


def run(cfg: RunConfig) -> int:
    """Execute a resolved configuration; returns the exit status."""
    out = cfg.prepare()
    rep = Report(cfg.command, {**cfg.params, "seed": cfg.seed})
    COMMANDS[cfg.command](cfg, rep)
    rep.write(out)
    return EXIT_OK if rep.passed else EXIT_CHECK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = vars(args)
    try:
        config = load_config(flags.pop("config")) if flags.get("config") else {}
        cfg = RunConfig.resolve(args.command, DEFAULTS[args.command], config, flags)
        status = run(cfg)
    except ConfigError as exc:
        print(f"convexdrum: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvexDrumError as exc:
        print(f"convexdrum: {exc.module}: {exc}", file=sys.stderr)
        return EXIT_MODULE
    report = cfg.output_dir / "report.json"
    print(f"{cfg.command}: {'ok' if status == EXIT_OK else 'CHECK FAILED'} ({report})")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
