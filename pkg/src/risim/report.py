"""Result persistence: campaign/analysis CSVs and the run manifest.

All CSVs are comma separated with '.' decimals and LF line endings; a
leading '#' comment line names the units of every column.
"""

import csv
from pathlib import Path

from .config import RunConfig, config_hash, config_to_yaml
from .engine import MetricsReport, SinrPoint

TOOL_VERSION = "0.1.0"

CAMPAIGN_COLUMNS = ["px_dbw", "scheme", "ber1", "ber2", "sinr_emp_db",
                    "sinr_analytic_db", "r_l", "r_h", "r_total", "cplx1",
                    "cplx2", "sel_codeword_mode", "n_blocks", "seed"]

CAMPAIGN_UNITS = ("# units: px_dbw=dBW; ber=dimensionless; sinr=dB; "
                  "r_l/r_h/r_total=packets/s; cplx=complex-products")

SINR_COLUMNS = ["px_dbw", "mode", "sinr_emp_db", "sinr_analytic_db",
                "beta_d_meas", "beta_r_meas", "n_samples"]

ANALYSIS_COLUMNS = ["P_x_dBW", "rho_ncds_dB", "rho_d_dB", "rho_r_dB",
                    "rho_emp_dB"]


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _write_rows(path, unit_line: str, header: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(unit_line + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_campaign_csv(path, reports: list[MetricsReport]) -> None:
    rows = []
    for r in reports:
        emp = r.sinr_emp2_db if r.n_blocks and not _is_nan(r.sinr_emp2_db) \
            else r.sinr_emp1_db
        rows.append([r.px_dbw, r.scheme, r.ber_stage1, r.ber_stage2, emp,
                     r.sinr_analytic_db, r.r_l, r.r_h, r.r_total, r.cplx1,
                     r.cplx2, r.selected_mode, r.n_blocks, r.master_seed])
    _write_rows(path, CAMPAIGN_UNITS, CAMPAIGN_COLUMNS, rows)


def _is_nan(x: float) -> bool:
    return x != x


def write_sinr_csv(path, points: list[SinrPoint]) -> None:
    rows = [[p.px_dbw, p.mode, p.sinr_emp_db, p.sinr_analytic_db,
             p.beta_d_meas, p.beta_r_meas, p.n_samples] for p in points]
    _write_rows(path, "# units: px_dbw=dBW; sinr=dB; beta=linear-gain",
                SINR_COLUMNS, rows)


def write_analysis_csv(path, rows) -> None:
    """rows: iterables (px_dbw, rho_ncds_db, rho_d_db, rho_r_db, rho_emp_db)."""
    _write_rows(path, "# units: P_x_dBW=dBW; rho_*=dB (empty=not computed)",
                ANALYSIS_COLUMNS, rows)


def write_manifest(path, config: RunConfig, seed: int, wall_s: float,
                   outputs: list[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"tool_version: {TOOL_VERSION}",
        f"config_sha256: {config_hash(config)}",
        f"master_seed: {seed}",
        f"wall_seconds: {wall_s:.3f}",
        f"outputs: {', '.join(outputs)}",
    ]
    path.write_text("\n".join(lines) + "\n")


def freeze_config(path, config: RunConfig) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config_to_yaml(config))
