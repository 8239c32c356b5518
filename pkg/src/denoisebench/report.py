"""Evaluation records, aggregate reports, rendering, and run comparison.

A report carries per-image records, per-variant summaries, and named deltas
between variants. Metric fields are stored at full precision and shown at
four decimals in rendered tables. Timing and memory are volatile by nature;
``canonical_json`` strips them (and nothing else), so two runs of the same
configuration produce byte-identical canonical bytes, which is what the
determinism check compares.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

SCHEMA = "denoisebench/report/v1"

# Process-dependent fields excluded from the canonical projection.
VOLATILE_KEYS = frozenset({"wall_ms", "peak_mem_mb", "mean_wall_ms", "max_peak_mem_mb"})


class ReportMismatchError(ValueError):
    """Two reports cover different variants or image sets."""


@dataclass(frozen=True)
class EvalRecord:
    image_id: str
    variant: str
    psnr_db: float
    ssim: float
    wall_ms: float
    peak_mem_mb: float | None
    noise_digest: str
    source_depth: int
    width: int
    height: int


@dataclass(frozen=True)
class VariantSummary:
    """Aggregate row; means are None when the variant has no surviving records."""

    variant: str
    n_images: int
    mean_psnr_db: float | None
    mean_ssim: float | None
    mean_wall_ms: float | None
    max_peak_mem_mb: float | None


@dataclass(frozen=True)
class DeltaRow:
    """Named difference between two variants' mean metrics (minuend - subtrahend)."""

    name: str
    minuend: str
    subtrahend: str
    psnr_delta_db: float
    ssim_delta: float


@dataclass
class AblationReport:
    config_digest: str
    meta: dict
    summaries: list[VariantSummary]
    deltas: list[DeltaRow]
    records: list[EvalRecord]
    failures: list[dict] = field(default_factory=list)
    schema: str = SCHEMA


def _mean(values: list[float]) -> float | None:
    return math.fsum(values) / len(values) if values else None


def summarize_variant(variant: str, records: list[EvalRecord]) -> VariantSummary:
    mems = [r.peak_mem_mb for r in records if r.peak_mem_mb is not None]
    return VariantSummary(
        variant=variant,
        n_images=len(records),
        mean_psnr_db=_mean([r.psnr_db for r in records]),
        mean_ssim=_mean([r.ssim for r in records]),
        mean_wall_ms=_mean([r.wall_ms for r in records]),
        max_peak_mem_mb=max(mems) if mems else None,
    )


def build_report(records: list[EvalRecord], failures: list[dict],
                 config_digest: str, meta: dict,
                 delta_pairs: list[tuple[str, str, str]] | None = None,
                 variants: list[str] | None = None) -> AblationReport:
    """Aggregate records into a report.

    ``delta_pairs`` rows are ``(name, minuend_variant, subtrahend_variant)``;
    deltas are differences of the variants' mean metrics and are skipped when
    either side has no records. Passing ``variants`` keeps planned variants
    visible (n_images 0, null aggregates) even if every image failed.
    """
    order = list(variants) if variants else []
    for r in records:
        if r.variant not in order:
            order.append(r.variant)
    by_variant = {v: [r for r in records if r.variant == v] for v in order}
    summaries = [summarize_variant(v, by_variant[v]) for v in order]
    sm = {s.variant: s for s in summaries}
    deltas = []
    for name, minuend, subtrahend in delta_pairs or []:
        a, b = sm[minuend], sm[subtrahend]
        if a.mean_psnr_db is None or b.mean_psnr_db is None:
            continue
        deltas.append(DeltaRow(name=name, minuend=minuend, subtrahend=subtrahend,
                               psnr_delta_db=a.mean_psnr_db - b.mean_psnr_db,
                               ssim_delta=a.mean_ssim - b.mean_ssim))
    return AblationReport(config_digest=config_digest, meta=dict(meta),
                          summaries=summaries, deltas=deltas,
                          records=list(records), failures=list(failures))


def _with_display(d: dict, keys: tuple[str, ...]) -> dict:
    # Raw full-precision values stay; *_display adds the 4-decimal rendering.
    out = dict(d)
    for k in keys:
        if d.get(k) is not None:
            out[k + "_display"] = f"{d[k]:.4f}"
    return out


def report_to_dict(report: AblationReport) -> dict:
    return {
        "schema": report.schema,
        "config_digest": report.config_digest,
        "meta": dict(report.meta),
        "summaries": [_with_display(asdict(s), ("mean_psnr_db", "mean_ssim"))
                      for s in report.summaries],
        "deltas": [_with_display(asdict(d), ("psnr_delta_db", "ssim_delta"))
                   for d in report.deltas],
        "records": [_with_display(asdict(r), ("psnr_db", "ssim"))
                    for r in report.records],
        "failures": list(report.failures),
    }


def _pick(cls, d: dict) -> dict:
    names = {f.name for f in fields(cls)}
    return {k: v for k, v in d.items() if k in names}


def report_from_dict(d: dict) -> AblationReport:
    if d.get("schema") != SCHEMA:
        raise ValueError(f"unsupported report schema {d.get('schema')!r}")
    return AblationReport(
        config_digest=d["config_digest"],
        meta=dict(d["meta"]),
        summaries=[VariantSummary(**_pick(VariantSummary, s)) for s in d["summaries"]],
        deltas=[DeltaRow(**_pick(DeltaRow, x)) for x in d["deltas"]],
        records=[EvalRecord(**_pick(EvalRecord, r)) for r in d["records"]],
        failures=list(d.get("failures", [])),
        schema=d["schema"],
    )


def dumps_json(report: AblationReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def loads_json(text: str) -> AblationReport:
    return report_from_dict(json.loads(text))


def _strip_volatile(obj):
    if isinstance(obj, dict):
        return {k: _strip_volatile(v) for k, v in obj.items() if k not in VOLATILE_KEYS}
    if isinstance(obj, list):
        return [_strip_volatile(v) for v in obj]
    return obj


def canonical_json(report: AblationReport) -> bytes:
    """Deterministic bytes: volatile fields stripped, keys sorted, compact."""
    payload = _strip_volatile(report_to_dict(report))
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _f4(v) -> str:
    return "" if v is None else f"{v:.4f}"


def render_markdown(report: AblationReport) -> str:
    out = io.StringIO()
    out.write(f"# Evaluation report\n\nconfig digest: `{report.config_digest}`\n\n")
    if report.meta:
        for k in sorted(report.meta):
            out.write(f"- {k}: {report.meta[k]}\n")
        out.write("\n")
    out.write("| variant | images | PSNR (dB) | SSIM | wall (ms) | peak mem (MB) |\n")
    out.write("|---|---:|---:|---:|---:|---:|\n")
    for s in report.summaries:
        wall = "" if s.mean_wall_ms is None else f"{s.mean_wall_ms:.2f}"
        mem = "" if s.max_peak_mem_mb is None else f"{s.max_peak_mem_mb:.1f}"
        out.write(f"| {s.variant} | {s.n_images} | {_f4(s.mean_psnr_db)} | "
                  f"{_f4(s.mean_ssim)} | {wall} | {mem} |\n")
    if report.deltas:
        out.write("\n| delta | PSNR (dB) | SSIM |\n|---|---:|---:|\n")
        for d in report.deltas:
            out.write(f"| {d.name} | {d.psnr_delta_db:+.4f} | {d.ssim_delta:+.4f} |\n")
    if report.failures:
        out.write(f"\n{len(report.failures)} image(s) failed:\n\n")
        for f in report.failures:
            out.write(f"- {f.get('image_id', '?')}: {f.get('error', '')}\n")
    return out.getvalue()


def render_csv(report: AblationReport) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["image_id", "variant", "psnr_db", "ssim", "wall_ms",
                "peak_mem_mb", "noise_digest", "source_depth", "width", "height"])
    for r in report.records:
        w.writerow([r.image_id, r.variant, repr(r.psnr_db), repr(r.ssim),
                    f"{r.wall_ms:.3f}", "" if r.peak_mem_mb is None else f"{r.peak_mem_mb:.1f}",
                    r.noise_digest, r.source_depth, r.width, r.height])
    return out.getvalue()


def render_report(report: AblationReport, fmt: str) -> str:
    if fmt == "json":
        return dumps_json(report)
    if fmt == "canonical-json":
        return canonical_json(report).decode("utf-8") + "\n"
    if fmt == "markdown":
        return render_markdown(report)
    if fmt == "csv":
        return render_csv(report)
    raise ValueError(f"unknown report format {fmt!r}")


@dataclass(frozen=True)
class VariantDelta:
    variant: str
    n_images: int
    psnr_a: float
    psnr_b: float
    psnr_delta_db: float
    ssim_a: float
    ssim_b: float
    ssim_delta: float


@dataclass
class RunComparison:
    """Mean deltas per variant plus per-image deltas (all ``b - a``)."""

    label_a: str
    label_b: str
    variants: list[VariantDelta]
    records: list[dict]


def compare_runs(a: AblationReport, b: AblationReport,
                 label_a: str = "A", label_b: str = "B") -> RunComparison:
    """Metric deltas ``b - a`` between two runs, per variant and per image.

    Refuses to compare when the runs cover different variants or different
    image sets for any shared variant; it never silently intersects.
    """
    va = {s.variant for s in a.summaries}
    vb = {s.variant for s in b.summaries}
    if va != vb:
        raise ReportMismatchError(f"variant sets differ: {sorted(va)} vs {sorted(vb)}")
    recs_a = {(r.variant, r.image_id): r for r in a.records}
    recs_b = {(r.variant, r.image_id): r for r in b.records}
    for v in sorted(va):
        ids_a = sorted(i for w, i in recs_a if w == v)
        ids_b = sorted(i for w, i in recs_b if w == v)
        if ids_a != ids_b:
            raise ReportMismatchError(f"variant {v!r} covers different images")
    sa = {s.variant: s for s in a.summaries}
    sb = {s.variant: s for s in b.summaries}
    rows = [VariantDelta(variant=s.variant, n_images=s.n_images,
                         psnr_a=sa[s.variant].mean_psnr_db, psnr_b=sb[s.variant].mean_psnr_db,
                         psnr_delta_db=sb[s.variant].mean_psnr_db - sa[s.variant].mean_psnr_db,
                         ssim_a=sa[s.variant].mean_ssim, ssim_b=sb[s.variant].mean_ssim,
                         ssim_delta=sb[s.variant].mean_ssim - sa[s.variant].mean_ssim)
            for s in a.summaries]
    per_image = [{"variant": v, "image_id": i,
                  "psnr_delta_db": recs_b[(v, i)].psnr_db - recs_a[(v, i)].psnr_db,
                  "ssim_delta": recs_b[(v, i)].ssim - recs_a[(v, i)].ssim}
                 for (v, i) in sorted(recs_a)]
    return RunComparison(label_a=label_a, label_b=label_b, variants=rows,
                         records=per_image)


def render_comparison(cmp: RunComparison, fmt: str = "markdown") -> str:
    if fmt == "json":
        return json.dumps({"label_a": cmp.label_a, "label_b": cmp.label_b,
                           "variants": [asdict(v) for v in cmp.variants],
                           "records": cmp.records},
                          indent=2, sort_keys=True) + "\n"
    if fmt == "markdown":
        out = io.StringIO()
        out.write(f"| variant | PSNR {cmp.label_a} | PSNR {cmp.label_b} | dPSNR | "
                  f"SSIM {cmp.label_a} | SSIM {cmp.label_b} | dSSIM |\n")
        out.write("|---|---:|---:|---:|---:|---:|---:|\n")
        for v in cmp.variants:
            out.write(f"| {v.variant} | {v.psnr_a:.4f} | {v.psnr_b:.4f} | "
                      f"{v.psnr_delta_db:+.4f} | {v.ssim_a:.4f} | {v.ssim_b:.4f} | "
                      f"{v.ssim_delta:+.4f} |\n")
        return out.getvalue()
    if fmt == "csv":
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["variant", "image_id", "psnr_delta_db", "ssim_delta"])
        for r in cmp.records:
            w.writerow([r["variant"], r["image_id"], repr(r["psnr_delta_db"]),
                        repr(r["ssim_delta"])])
        return out.getvalue()
    raise ValueError(f"unknown comparison format {fmt!r}")


__all__ = ["EvalRecord", "VariantSummary", "DeltaRow", "AblationReport",
           "build_report", "summarize_variant", "report_to_dict", "report_from_dict",
           "dumps_json", "loads_json", "canonical_json", "render_report",
           "render_markdown", "render_csv", "compare_runs", "render_comparison",
           "RunComparison", "VariantDelta", "ReportMismatchError", "SCHEMA",
           "VOLATILE_KEYS"]
