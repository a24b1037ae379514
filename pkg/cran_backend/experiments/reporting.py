"""
Sweep result emission: CSV (one row per strategy and grid value), the
structured JSON results file, or a tabular PDF.

Powers in the CSV and the PDF are normalized by the number of RRHs; the
structured file keeps the raw per-drop totals.
"""

import pandas as pd
from django.core.exceptions import ValidationError

from utils.report_pdf import TabularPDF

from .serializers import dump_results

FORMAT_CSV = 'csv'
FORMAT_STRUCTURED = 'json'
FORMAT_PDF = 'pdf'
FORMATS = (FORMAT_CSV, FORMAT_STRUCTURED, FORMAT_PDF)

CSV_COLUMNS = ['strategy', 'swept_param', 'value', 'mean_power_W', 'stderr_W', 'n_feasible', 'n_drops', 'mean_gap']


def _normalized(power, num_rrhs):
    return None if power is None else power / num_rrhs


def result_frame(result):
    rows = [{
        'strategy': point.strategy,
        'swept_param': result.spec.param,
        'value': point.value,
        'mean_power_W': _normalized(point.mean_power, result.spec.num_rrhs),
        'stderr_W': _normalized(point.stderr, result.spec.num_rrhs),
        'n_feasible': point.n_feasible,
        'n_drops': point.n_drops,
        'mean_gap': point.mean_gap,
    } for point in result.points]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def emit_csv(result):
    return result_frame(result).to_csv(index=False, lineterminator='\n').encode('utf-8')


def emit_pdf(result):
    spec = result.spec
    frame = result_frame(result).astype(object)
    rows = frame.where(frame.notna(), None).to_dict('records')
    metadata = {
        'RRHs': spec.num_rrhs,
        'users': spec.template.num_users,
        'subchannels': spec.template.num_subchannels,
        'contents': spec.template.num_contents,
        'drops per point': spec.num_drops,
        'seed': spec.seed,
        'solver mode': spec.solver.mode,
    }
    title = f"Transmit power per RRH versus {spec.param.replace('_', ' ')}"
    return TabularPDF(title, rows, columns=CSV_COLUMNS, description="powers in W, normalized by the number of RRHs",
                      metadata=metadata).generate()


def emit_results(result, fmt=FORMAT_CSV):
    if fmt == FORMAT_CSV:
        return emit_csv(result)
    if fmt == FORMAT_STRUCTURED:
        return dump_results(result)
    if fmt == FORMAT_PDF:
        return emit_pdf(result)
    raise ValidationError({'format': f"expected one of {', '.join(FORMATS)}, got {fmt!r}"})
