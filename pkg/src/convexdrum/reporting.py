"""Run configuration, report files and SVG rendering.

Config files are plain ``key = value`` lines; ``#`` starts a comment and
keys may use dashes or underscores.  Values are parsed as int, float,
boolean (``true``/``false``) or string, in that order.  Precedence:
command-line flag, then the ``CONVEXDRUM_OUTPUT_DIR`` environment variable
(output directory only), then the config file, then the built-in default.
"""

from __future__ import annotations

import datetime as _dt
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._json import dumps
from .errors import ConfigError
from .geometry import ConvexShape, decompose_boundary

OUTPUT_ENV = "CONVEXDRUM_OUTPUT_DIR"


def _parse_value(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
        return t[1:-1]
    return t


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines into a dict with underscore keys."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if not key.replace("_", "").isalnum():
            raise ConfigError(f"line {n}: bad key {key!r}")
        out[key] = _parse_value(value)
    return out


def load_config(path) -> dict:
    try:
        return parse_config(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


@dataclass
class RunConfig:
    """Parameters of one subcommand run."""

    command: str
    params: dict = field(default_factory=dict)
    output_dir: Path = Path("convexdrum_out")
    seed: int = 0

    def __post_init__(self):
        for k, v in self.params.items():
            if (k.endswith("tol") or k == "tolerance") and not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"tolerance {k} must be positive, got {v!r}")
        self.output_dir = Path(self.output_dir)

    @classmethod
    def resolve(cls, command: str, defaults: dict, config: dict, flags: dict) -> "RunConfig":
        """Merge defaults, config file values and explicitly given flags."""
        unknown = sorted(set(config) - set(defaults) - {"output_dir", "seed"})
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
        params = dict(defaults)
        params.update({k: v for k, v in config.items() if k in defaults})
        params.update({k: v for k, v in flags.items() if v is not None and k in defaults})
        out = flags.get("output_dir") or os.environ.get(OUTPUT_ENV) or config.get("output_dir") or "convexdrum_out"
        seed = flags.get("seed")
        if seed is None:
            seed = config.get("seed", 0)
        return cls(command, params, Path(out), int(seed))

    def prepare(self) -> Path:
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {self.output_dir} is not writable: {exc}") from exc
        if not os.access(self.output_dir, os.W_OK):
            raise ConfigError(f"output directory {self.output_dir} is not writable")
        return self.output_dir


@dataclass
class Report:
    """Numbers and invariant checks of one run."""

    command: str
    parameters: dict
    results: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.checks.values())

    def check(self, name: str, ok) -> bool:
        self.checks[name] = bool(ok)
        return bool(ok)

    def as_dict(self, timestamp: bool = True) -> dict:
        d = {"command": self.command, "parameters": self.parameters, "results": self.results,
             "checks": self.checks, "passed": self.passed, "files": sorted(self.files)}
        if timestamp:
            d["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        return d

    def write(self, directory: Path, name: str = "report.json") -> Path:
        path = Path(directory) / name
        path.write_text(dumps(self.as_dict()) + "\n")
        return path


# ---------------------------------------------------------------------------
# SVG


_FLAT_COLOR = "#d62728"
_ARC_COLOR = "#1f2d3d"
_JUNCTION_COLOR = "#ff7f0e"


def _colormap(t: float) -> str:
    # blue -> white -> red
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        u = t / 0.5
        r, g, b = 0.23 + 0.77 * u, 0.30 + 0.70 * u, 0.75 + 0.25 * u
    else:
        u = (t - 0.5) / 0.5
        r, g, b = 1.0 - 0.30 * u, 1.0 - 0.98 * u, 1.0 - 0.85 * u
    return "#%02x%02x%02x" % (round(255 * r), round(255 * g), round(255 * b))


def render_svg(shape: ConvexShape, overlay: np.ndarray | None = None, overlay_label: str = "",
               size: int = 480, decomposition=None) -> str:
    """Standalone SVG of ``shape`` with flat runs highlighted and junctions marked.

    ``overlay`` holds one value per polygon edge (for example the flux or
    the curvature); strictly convex edges are then colored by value and a
    colorbar is added.  Output is deterministic for fixed input.
    """
    if decomposition is None:
        decomposition = decompose_boundary(shape)
    v = shape.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    span = float(max(hi - lo))
    pad = 0.08 * span
    scale = (size - 2 * 24) / (span + 2 * pad)
    bar = 70 if overlay is not None else 0
    width, height = size + bar, size

    def xy(p):
        x = 24 + (p[0] - lo[0] + pad) * scale
        y = height - 24 - (p[1] - lo[1] + pad) * scale
        return f"{x:.3f},{y:.3f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           '<path d="M ' + " L ".join(xy(p) for p in v) + f' Z" fill="#f2f4f7" stroke="{_ARC_COLOR}" '
           'stroke-width="1.5" stroke-linejoin="round"/>']
    labels = decomposition.edge_labels()
    if overlay is not None:
        vals = np.asarray(overlay, dtype=float)
        arc = np.array([k == "arc" for k, _ in labels])
        sel = vals[arc & np.isfinite(vals)]
        vmin, vmax = (float(sel.min()), float(sel.max())) if sel.size else (0.0, 1.0)
        rng = vmax - vmin if vmax > vmin else 1.0
        for i, (kind, _) in enumerate(labels):
            if kind == "arc" and np.isfinite(vals[i]):
                c = _colormap((vals[i] - vmin) / rng)
                out.append(f'<polyline class="overlay" points="{xy(v[i])} {xy(v[(i + 1) % len(v)])}" '
                           f'stroke="{c}" stroke-width="4" stroke-linecap="round"/>')
    for run in decomposition.flat_runs:
        pts = [v[run.start]] + [v[(i + 1) % shape.n] for i in run.edge_indices(shape.n)]
        out.append('<polyline class="flat" points="' + " ".join(xy(p) for p in pts) +
                   f'" fill="none" stroke="{_FLAT_COLOR}" stroke-width="4"/>')
    for J in decomposition.junctions:
        x, y = xy(v[J.vertex]).split(",")
        out.append(f'<circle class="junction" cx="{x}" cy="{y}" r="4" fill="{_JUNCTION_COLOR}" '
                   'stroke="black" stroke-width="0.8"/>')
    if overlay is not None:
        x0, y0, h = size + 18, 40, height - 80
        out.append('<g class="colorbar">')
        for k in range(32):
            c = _colormap(1 - (k + 0.5) / 32)
            out.append(f'<rect x="{x0}" y="{y0 + k * h / 32:.3f}" width="14" height="{h / 32 + 0.5:.3f}" fill="{c}"/>')
        out.append(f'<text x="{x0}" y="{y0 - 8}" font-size="11" font-family="sans-serif">{vmax:.4g}</text>')
        out.append(f'<text x="{x0}" y="{y0 + h + 16}" font-size="11" font-family="sans-serif">{vmin:.4g}</text>')
        if overlay_label:
            out.append(f'<text x="{x0 - 4}" y="{height - 8}" font-size="11" font-family="sans-serif">'
                       f'{overlay_label}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
