"""Fixed-width text tables rendered from a pipeline report.

Values print with 4 decimals; magnitudes below 1e-3 switch to scientific
notation so small trend coefficients stay readable. Cells that do not apply
print as ``-``. Every rendered number parses back with ``float``.
"""

from __future__ import annotations

import math

from .errors import ValidationError

TABLES = ("seasonality", "distribution_fits", "tml_fit", "distribution_gof")
FAMILY_ORDER = ("Normal", "HYP", "GH", "NIG", "VG")
TML_COLUMNS = (("sigma_1", "σ1"), ("kappa", "κ"), ("mu", "μ"), ("sigma_2", "σ2"), ("P11", "P11"), ("P22", "P22"))
SEASONAL_COLUMNS = ("A0", "A1", "A2", "phi")
GH_ROWS = (("nu", "ν"), ("alpha", "α"), ("beta", "β"), ("mu", "μ"), ("delta", "δ"))
_ALIASES = {"6": "seasonality", "7": "distribution_fits", "8": "tml_fit", "9": "distribution_gof",
            "table6": "seasonality", "table7": "distribution_fits", "table8": "tml_fit",
            "table9": "distribution_gof"}


def format_value(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    v = float(v)
    if v != 0.0 and abs(v) < 1e-3:
        return f"{v:.4e}"
    return f"{v:.4f}"


def _grid(header: list, rows: list) -> str:
    cells = [header] + rows
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for k, r in enumerate(cells):
        first = r[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join([first] + rest).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _stations(report: dict, key: str) -> dict:
    stations = report.get("stations") or {}
    found = {name: sec[key] for name, sec in stations.items() if sec.get(key)}
    if not found:
        raise ValidationError(f"report has no '{key}' section to render")
    return found


def _families(sections: dict) -> list:
    present = {f for sec in sections.values() for f in sec}
    return [f for f in FAMILY_ORDER if f in present] + sorted(present - set(FAMILY_ORDER))


def table_seasonality(report: dict, convention: str = "paper_convention") -> str:
    secs = _stations(report, "seasonality")
    rows = [[name] + [format_value(sec[convention][c]) for c in SEASONAL_COLUMNS] for name, sec in secs.items()]
    return _grid(["Station", "A0", "A1", "A2", "φ"], rows)


def table_tml_fit(report: dict) -> str:
    secs = _stations(report, "tml_fit")
    rows = [[name] + [format_value(sec["params"][k]) for k, _ in TML_COLUMNS] for name, sec in secs.items()]
    return _grid(["Parameter"] + [label for _, label in TML_COLUMNS], rows)


def table_distribution_fits(report: dict) -> str:
    secs = _stations(report, "distribution_fits")
    families = _families(secs)
    rows = []
    for name, sec in secs.items():
        rows.append([name] + [""] * len(families))
        for key, label in GH_ROWS:
            rows.append([label] + [format_value(sec[f]["table7"][key]) if f in sec else "-" for f in families])
    return _grid([""] + families, rows)


def table_distribution_gof(report: dict, scaled: bool = True) -> str:
    """Kolmogorov-Smirnov (``sqrt(n) D`` when ``scaled``) and Anderson-Darling per family."""
    secs = _stations(report, "distribution_gof")
    families = _families(secs)
    rows = []
    for name, sec in secs.items():
        rows.append([name] + [""] * len(families))
        ks = [sec[f]["kolmogorov_smirnov"]["scaled" if scaled else "statistic"] if f in sec else None
              for f in families]
        ad = [sec[f]["anderson_darling"]["statistic"] if f in sec else None for f in families]
        rows.append(["Kolmogorov-Smirnov"] + [format_value(v) for v in ks])
        rows.append(["Anderson-Darling"] + [format_value(v) for v in ad])
    return _grid([""] + families, rows)


_RENDERERS = {"seasonality": table_seasonality, "distribution_fits": table_distribution_fits,
              "tml_fit": table_tml_fit, "distribution_gof": table_distribution_gof}


def render_tables(report: dict, which="all") -> str:
    """Render one table (by section key, ``tableN`` or ``N`` for 6-9) or ``"all"``.

    Raises
    ------
    ValidationError
        The requested section is missing or empty, or ``which`` is unknown.
    """
    if which == "all":
        names = list(TABLES)
    else:
        key = _ALIASES.get(str(which).lower(), str(which))
        if key not in _RENDERERS:
            raise ValidationError(f"unknown table {which!r}; expected one of {TABLES} or 6-9")
        names = [key]
    return "\n".join(_RENDERERS[n](report) for n in names)


def parse_table(text: str) -> list[list[str]]:
    """Split a rendered table back into rows of cells (header and rule dropped)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    return [ln.split() for ln in lines[2:]]


__all__ = ["TABLES", "format_value", "parse_table", "render_tables", "table_distribution_fits",
           "table_distribution_gof", "table_seasonality", "table_tml_fit"]
