"""Renderers: one figure per spec, or a gallery per artifact directory."""

from __future__ import annotations

import html
import json
import math
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .artifacts import (
    SchemaError,
    classify_artifact,
    read_csv,
    read_json,
    require_keys,
)
from .spec import FigureSpec

# fixed palette keyed by the leading letter of a membership code
MEMBER_COLORS = {
    "P": "tab:orange",
    "N": "tab:blue",
    "G": "tab:green",
    "U": "0.55",
    "F": "tab:purple",
}
STATUS_COLORS = {
    "satisfied": "tab:green",
    "violated": "tab:red",
}

# strip volatile keys so identical inputs produce identical bytes
_PNG_META = {"Software": "bsfigures"}


@dataclass
class RenderResult:
    path: str
    kind: str
    source: str
    counts: dict[str, int] = field(default_factory=dict)
    notices: list[str] = field(default_factory=list)


@dataclass
class GalleryResult:
    figures: list[RenderResult]
    warnings: list[str]
    index_path: str
    gallery_path: str


def _save(fig, spec: FigureSpec) -> None:
    out_dir = os.path.dirname(spec.out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    fig.savefig(spec.out, dpi=spec.dpi, metadata=_PNG_META)
    plt.close(fig)


def _sorted_by(xs: list[float], *others: list):
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    out = [[col[i] for i in order] for col in (xs, *others)]
    return out


def render_profile(spec: FigureSpec) -> RenderResult:
    table = read_csv(spec.inputs["trajectory"])
    table.require("r", "u", "uprime")
    r = table.floats("r")
    u = table.floats("u")
    up = table.floats("uprime")
    has_energy = "I" in table.columns
    counts = {"rows": len(r), "zero_markers": 0, "extremum_markers": 0,
              "double_zero_markers": 0}
    notices: list[str] = []

    nrows = 2 if has_energy else 1
    fig, axes = plt.subplots(nrows, 1, figsize=(7.0, 5.0), sharex=True,
                             squeeze=False)
    ax = axes[0][0]
    ax.plot(r, u, color="tab:blue", lw=1.4, label="u")
    ax.plot(r, up, color="tab:blue", lw=0.9, ls="--", alpha=0.6, label="u'")
    ax.axhline(0.0, color="0.4", lw=0.7)
    ax.set_ylabel("u, u'")

    events_path = spec.inputs.get("events")
    if events_path:
        data = read_json(events_path)
        require_keys(events_path, data, "events")
        for ev in data["events"]:
            kind = ev.get("kind")
            r_ev = float(ev.get("r", math.nan))
            vs = ev.get("value_slope")
            vs = float(vs) if vs is not None else math.nan
            if kind == "u_zero":
                counts["zero_markers"] += 1
                label = f"Z{ev['k']}" if ev.get("k") is not None else "Z"
                ax.plot([r_ev], [0.0], "o", color="tab:red", ms=7, zorder=5)
                ax.annotate(label, (r_ev, 0.0), textcoords="offset points",
                            xytext=(4, 8), color="tab:red", fontsize=9)
            elif kind == "uprime_zero":
                counts["extremum_markers"] += 1
                ax.plot([r_ev], [vs], "^", color="tab:green", ms=6, zorder=5)
            elif kind == "double_zero":
                counts["double_zero_markers"] += 1
                ax.plot([r_ev], [0.0], "*", color="tab:purple", ms=10, zorder=6)
        if data.get("stop_reason"):
            notices.append(f"stop_reason: {data['stop_reason']}")
            ax.annotate(str(data["stop_reason"]), xy=(0.99, 0.02),
                        xycoords="axes fraction", ha="right", fontsize=8,
                        color="0.35")
    ax.legend(loc="upper right", fontsize=8)

    if has_energy:
        ax2 = axes[1][0]
        ax2.plot(r, table.floats("I"), color="tab:brown", lw=1.2)
        ax2.axhline(0.0, color="0.4", lw=0.7)
        ax2.set_ylabel("I")
        ax2.set_xlabel("r")
    else:
        ax.set_xlabel("r")

    alpha = table.meta.get("alpha")
    title = spec.title or (f"profile, alpha = {alpha}" if alpha else "profile")
    fig.suptitle(title, fontsize=11)
    _save(fig, spec)
    return RenderResult(spec.out, "profile", spec.inputs["trajectory"],
                        counts, notices)


def _sign_runs(s: list[float], d: list[float]):
    """Contiguous index runs where the derivative keeps one sign."""
    runs = []
    start = None
    sign = 0
    for i, di in enumerate(d):
        cur = 0 if not math.isfinite(di) else (1 if di >= 0 else -1)
        if cur == sign and cur != 0:
            continue
        if start is not None and sign != 0 and i - 1 > start:
            runs.append((start, i - 1, sign))
        start, sign = (i, cur) if cur != 0 else (None, 0)
    if start is not None and sign != 0 and len(d) - 1 > start:
        runs.append((start, len(d) - 1, sign))
    return runs


def render_trace(spec: FigureSpec) -> RenderResult:
    table = read_csv(spec.inputs["trace"])
    table.require("s", "value", "derivative_analytic", "derivative_fd")
    s, value, dan, dfd = _sorted_by(
        table.floats("s"), table.floats("value"),
        table.floats("derivative_analytic"), table.floats("derivative_fd"))
    counts = {"rows": len(s), "shade_segments": 0, "monitor_violations": 0}
    notices: list[str] = []

    fig, (ax_v, ax_d) = plt.subplots(2, 1, figsize=(7.0, 5.4), sharex=True)
    ax_v.plot(s, value, color="tab:blue", lw=1.3)
    ax_v.axhline(0.0, color="0.4", lw=0.7)
    ax_v.set_ylabel("value")
    for i0, i1, sign in _sign_runs(s, dan):
        color = "tab:green" if sign > 0 else "tab:red"
        ax_v.axvspan(s[i0], s[i1], color=color, alpha=0.10, lw=0)
        counts["shade_segments"] += 1

    ax_d.plot(s, dan, color="tab:blue", lw=1.2, label="analytic")
    ax_d.plot(s, dfd, ".", color="tab:orange", ms=3.5, label="finite diff")
    ax_d.axhline(0.0, color="0.4", lw=0.7)
    ax_d.set_ylabel("d/ds")
    ax_d.set_xlabel("s")

    monitor_path = spec.inputs.get("monitor")
    if monitor_path:
        data = read_json(monitor_path)
        require_keys(monitor_path, data, "monitor")
        mon = data["monitor"]
        require_keys(monitor_path, mon, "claim", "s_range", "n_violations",
                     "clean")
        lo, hi = float(mon["s_range"][0]), float(mon["s_range"][1])
        ax_d.axvspan(lo, hi, color="0.5", alpha=0.12, lw=0)
        counts["monitor_violations"] = int(mon["n_violations"])
        tag = "clean" if mon["clean"] else f"{mon['n_violations']} violations"
        notices.append(f"monitor {mon.get('name', '?')} ({mon['claim']}): {tag}")
        if mon.get("worst_s") is not None and not mon["clean"]:
            ax_d.plot([float(mon["worst_s"])], [float(mon["worst_value"])],
                      "x", color="tab:red", ms=8, mew=2, zorder=6)
        ax_d.annotate(f"monitor: {tag}", xy=(0.99, 0.04),
                      xycoords="axes fraction", ha="right", fontsize=8,
                      color="0.35")
    ax_d.legend(loc="best", fontsize=8)

    name = table.meta.get("functional", "")
    title = spec.title or (f"trace {name}" if name else "trace")
    fig.suptitle(title, fontsize=11)
    _save(fig, spec)
    return RenderResult(spec.out, "trace", spec.inputs["trace"], counts,
                        notices)


def _notice_figure(spec: FigureSpec, message: str) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 3.0))
    ax.set_axis_off()
    ax.text(0.5, 0.5, message, ha="center", va="center", fontsize=11,
            color="0.3", transform=ax.transAxes)
    if spec.title:
        fig.suptitle(spec.title, fontsize=11)
    _save(fig, spec)


def render_sweep(spec: FigureSpec) -> RenderResult:
    table = read_csv(spec.inputs["sweep"])
    table.require("alpha", "terminal_k", "membership_code", "Z_k", "slope")
    counts = {"rows": len(table.rows), "transitions": 0, "brackets": 0,
              "zoom_panels": 0}
    notices: list[str] = []

    brackets = []
    stars = []
    brackets_path = spec.inputs.get("brackets")
    if brackets_path:
        data = read_json(brackets_path)
        require_keys(brackets_path, data, "brackets", "transitions")
        brackets = list(data["brackets"])
        counts["transitions"] = len(data["transitions"])
        counts["brackets"] = len(brackets)
        stars = [float(b["alpha_star"]) for b in brackets]

    if not table.rows:
        msg = "sweep produced no rows"
        notices.append(f"{msg}; rendered notice figure")
        _notice_figure(spec, msg)
        return RenderResult(spec.out, "sweep", spec.inputs["sweep"], counts,
                            notices)

    alpha = table.floats("alpha")
    zk = table.floats("Z_k")
    codes = [str(c) for c in table.column("membership_code")]
    colors = [MEMBER_COLORS.get(c[:1], "0.2") for c in codes]
    order = sorted(range(len(alpha)), key=lambda i: alpha[i])
    alpha = [alpha[i] for i in order]
    zk = [zk[i] for i in order]
    codes = [codes[i] for i in order]
    colors = [colors[i] for i in order]

    nz = len(brackets)
    fig = plt.figure(figsize=(7.0, 5.0 + (1.8 if nz else 0.0)))
    heights = [3, 1] + ([2] if nz else [])
    gs = fig.add_gridspec(len(heights), 1, height_ratios=heights, hspace=0.35)

    ax_z = fig.add_subplot(gs[0])
    ax_z.scatter(alpha, zk, c=colors, s=14, zorder=3)
    ax_z.set_ylabel("Z_k")
    for a in stars:
        ax_z.axvline(a, color="0.3", lw=0.8, ls="--")

    ax_m = fig.add_subplot(gs[1], sharex=ax_z)
    ax_m.scatter(alpha, [0.0] * len(alpha), c=colors, s=22, marker="s")
    ax_m.set_yticks([])
    ax_m.set_ylim(-1, 1)
    ax_m.set_xlabel("alpha")
    for a in stars:
        ax_m.axvline(a, color="0.3", lw=0.8, ls="--")
    seen = []
    for c in codes:
        if c[:1] not in seen:
            seen.append(c[:1])
    ax_m.annotate("  ".join(f"{letter}" for letter in seen), xy=(0.01, 0.7),
                  xycoords="axes fraction", fontsize=8, color="0.35")

    if nz:
        # zoom panels replot nearby sweep rows around each bracket;
        # nothing is recomputed
        sub = gs[2].subgridspec(1, nz, wspace=0.4)
        gaps = [b - a for a, b in zip(alpha, alpha[1:]) if b > a]
        pitch = sorted(gaps)[len(gaps) // 2] if gaps else 1.0
        for j, br in enumerate(brackets):
            axj = fig.add_subplot(sub[j])
            lo, hi = float(br["lo"]), float(br["hi"])
            a_star = float(br["alpha_star"])
            w_lo, w_hi = lo - 3 * pitch, hi + 3 * pitch
            sel = [i for i, a in enumerate(alpha) if w_lo <= a <= w_hi]
            axj.scatter([alpha[i] for i in sel], [zk[i] for i in sel],
                        c=[colors[i] for i in sel], s=16)
            axj.axvspan(lo, hi, color="0.6", alpha=0.25, lw=0)
            axj.axvline(a_star, color="0.2", lw=0.9, ls="--")
            axj.set_title(f"k={br.get('k', '?')}", fontsize=9)
            axj.tick_params(labelsize=7)
            counts["zoom_panels"] += 1

    title = spec.title or "sweep"
    fig.suptitle(title, fontsize=11)
    _save(fig, spec)
    return RenderResult(spec.out, "sweep", spec.inputs["sweep"], counts,
                        notices)


def render_margins(spec: FigureSpec) -> RenderResult:
    path = spec.inputs["check"]
    data = read_json(path)
    require_keys(path, data, "hypotheses")
    hyps = data["hypotheses"]
    if not isinstance(hyps, dict) or not hyps:
        raise SchemaError(f"{path} key 'hypotheses' must be a non-empty object")
    names = sorted(hyps)
    counts = {"hypotheses": len(names), "violated": 0, "certified": 0}
    notices: list[str] = []

    fig, ax = plt.subplots(figsize=(7.0, 0.45 * len(names) + 2.0))
    for i, name in enumerate(names):
        entry = hyps[name]
        status = str(entry.get("status", "unknown"))
        margin = entry.get("margin")
        margin = float(margin) if margin is not None else math.nan
        color = STATUS_COLORS.get(status, "0.6")
        if status == "violated":
            counts["violated"] += 1
        if math.isfinite(margin):
            ax.barh(i, margin, color=color, height=0.6)
            label = f"{status} ({margin:.3g})"
        else:
            label = f"{status} ({margin})"
        ax.text(0.0, i + 0.38, f"  {label}", fontsize=7, color="0.25",
                va="center")
    ax.axvline(0.0, color="0.3", lw=0.9)
    ax.set_yticks(range(len(names)), names)
    ax.set_xscale("symlog", linthresh=1e-8)
    ax.set_xlabel("margin")

    certs = data.get("certificates", {})
    lines = []
    for name in sorted(certs):
        ok = bool(certs[name].get("certified"))
        if ok:
            counts["certified"] += 1
        lines.append(f"{name}: {'certified' if ok else 'not certified'}")
    if lines:
        ax.annotate("\n".join(lines), xy=(0.99, 0.01), xycoords="axes fraction",
                    ha="right", va="bottom", fontsize=8, color="0.3")
        notices.extend(lines)

    title = spec.title or "hypothesis margins"
    fig.suptitle(title, fontsize=11)
    _save(fig, spec)
    return RenderResult(spec.out, "margins", path, counts, notices)


_RENDERERS = {
    "profile": render_profile,
    "trace": render_trace,
    "sweep": render_sweep,
    "margins": render_margins,
}


def render(spec: FigureSpec) -> RenderResult:
    spec.validate()
    return _RENDERERS[spec.kind](spec)


def _auto_spec(directory: str, name: str, kind: str, out_dir: str,
               files: set[str]) -> FigureSpec:
    """Wire companion files by convention for a directory scan."""
    stem = os.path.splitext(name)[0]
    inputs: dict[str, str] = {}
    if kind == "profile":
        inputs["trajectory"] = os.path.join(directory, name)
        if "events.json" in files:
            inputs["events"] = os.path.join(directory, "events.json")
    elif kind == "trace":
        inputs["trace"] = os.path.join(directory, name)
        if "monitor.json" in files:
            try:
                mon = read_json(os.path.join(directory, "monitor.json"))
            except SchemaError:
                mon = {}
            mon_name = mon.get("monitor", {}).get("name")
            if stem == f"trace_{mon_name}":
                inputs["monitor"] = os.path.join(directory, "monitor.json")
    elif kind == "sweep":
        inputs["sweep"] = os.path.join(directory, name)
        if "brackets.json" in files:
            inputs["brackets"] = os.path.join(directory, "brackets.json")
    elif kind == "margins":
        inputs["check"] = os.path.join(directory, name)
    return FigureSpec(kind=kind, inputs=inputs,
                      out=os.path.join(out_dir, f"{stem}.png"))


def render_all(directory: str, out_dir: str | None = None) -> GalleryResult:
    """Render every recognized artifact in a directory.

    Never fatal per file: schema problems become warnings and the scan
    continues.  Companion files (events, brackets, monitor) feed the
    figures of their parent artifacts and are skipped on their own.
    """
    if not os.path.isdir(directory):
        raise SchemaError(f"{directory} is not a directory")
    out_dir = out_dir or os.path.join(directory, "figures")
    os.makedirs(out_dir, exist_ok=True)
    files = {n for n in sorted(os.listdir(directory))
             if os.path.isfile(os.path.join(directory, n))}

    figures: list[RenderResult] = []
    warnings: list[str] = []
    for name in sorted(files):
        kind = classify_artifact(name)
        if kind == "companion":
            continue
        if kind is None:
            warnings.append(f"skipped unrecognized file {name}")
            continue
        try:
            spec = _auto_spec(directory, name, kind, out_dir, files)
            spec.validate()
            figures.append(render(spec))
        except SchemaError as exc:
            warnings.append(f"{name}: {exc}")
        except Exception as exc:  # keep the scan alive
            warnings.append(f"{name}: render failed: {exc}")

    gallery_path = os.path.join(out_dir, "gallery.json")
    payload = {
        "figures": [
            {
                "file": os.path.basename(f.path),
                "kind": f.kind,
                "source": os.path.basename(f.source),
                "counts": f.counts,
                "notices": f.notices,
            }
            for f in figures
        ],
        "warnings": warnings,
    }
    with open(gallery_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    index_path = os.path.join(out_dir, "index.html")
    rows = []
    for f in figures:
        cap = f"{f.kind} from {html.escape(os.path.basename(f.source))}"
        if f.notices:
            cap += " (" + html.escape("; ".join(f.notices)) + ")"
        rows.append(
            f'<figure><img src="{html.escape(os.path.basename(f.path))}" '
            f'alt="{html.escape(f.kind)}"><figcaption>{cap}</figcaption></figure>'
        )
    warn_html = "".join(f"<li>{html.escape(w)}</li>" for w in warnings)
    doc = (
        "<!doctype html>\n<html><head><meta charset=\"utf-8\">"
        "<title>figures</title></head>\n<body>\n<h1>figures</h1>\n"
        + "\n".join(rows)
        + (f"\n<h2>warnings</h2>\n<ul>{warn_html}</ul>" if warnings else "")
        + "\n</body></html>\n"
    )
    with open(index_path, "w", encoding="utf-8") as fh:
        fh.write(doc)
    return GalleryResult(figures, warnings, index_path, gallery_path)
