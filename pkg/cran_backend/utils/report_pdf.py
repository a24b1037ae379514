"""
Tabular PDF reports.

Rows are dicts; columns are given explicitly or taken from the first row.
The canvas runs in reportlab's invariant mode, so the same rows always give
the same bytes.
"""

from io import BytesIO

from reportlab.lib import colors
from reportlab.lib.pagesizes import A4, landscape
from reportlab.lib.units import cm
from reportlab.pdfgen import canvas
from reportlab.platypus import Table, TableStyle

ROWS_PER_PAGE = 32
MAX_CELL = 40

TABLE_STYLE = TableStyle([
    ('BACKGROUND', (0, 0), (-1, 0), colors.grey),
    ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
    ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
    ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
    ('FONTSIZE', (0, 0), (-1, 0), 8),
    ('BOTTOMPADDING', (0, 0), (-1, 0), 6),
    ('FONTNAME', (0, 1), (-1, -1), 'Helvetica'),
    ('FONTSIZE', (0, 1), (-1, -1), 7),
    ('GRID', (0, 0), (-1, -1), 0.5, colors.black),
    ('VALIGN', (0, 0), (-1, -1), 'MIDDLE'),
])


def format_cell(value):
    if value is None:
        return 'n/a'
    if isinstance(value, bool):
        return 'yes' if value else 'no'
    if isinstance(value, float):
        return f"{value:.6g}"
    text = str(value)
    return text if len(text) <= MAX_CELL else text[:MAX_CELL - 3] + '...'


class TabularPDF:
    """
    Usage:
        pdf = TabularPDF(title="Sweep", rows=[{...}, ...], metadata={"seed": 7})
        payload = pdf.generate()
    """

    def __init__(self, title, rows, columns=None, description=None, metadata=None):
        self.title = title
        self.rows = list(rows)
        self.columns = list(columns) if columns is not None else list(self.rows[0]) if self.rows else []
        self.description = description
        self.metadata = metadata or {}
        self.width, self.height = landscape(A4)

    def _header(self, pdf, page, pages):
        y = self.height - 1.5 * cm
        pdf.setFont("Helvetica-Bold", 14)
        pdf.drawCentredString(self.width / 2, y, self.title)
        y -= 0.6 * cm
        if self.description:
            pdf.setFont("Helvetica", 9)
            pdf.drawCentredString(self.width / 2, y, self.description)
            y -= 0.5 * cm
        pdf.setFont("Helvetica", 8)
        for key, value in self.metadata.items():
            pdf.drawString(1.5 * cm, y, f"{key}: {format_cell(value)}")
            y -= 0.4 * cm
        pdf.drawRightString(self.width - 1.5 * cm, 1 * cm, f"page {page} of {pages}")
        return y - 0.4 * cm

    def _table(self, chunk):
        data = [self.columns] + [[format_cell(row.get(col)) for col in self.columns] for row in chunk]
        col_width = (self.width - 3 * cm) / max(len(self.columns), 1)
        table = Table(data, colWidths=[col_width] * len(self.columns), repeatRows=1)
        table.setStyle(TABLE_STYLE)
        return table

    def generate(self):
        buffer = BytesIO()
        pdf = canvas.Canvas(buffer, pagesize=(self.width, self.height), invariant=1)
        pdf.setTitle(self.title)

        chunks = [self.rows[i:i + ROWS_PER_PAGE] for i in range(0, len(self.rows), ROWS_PER_PAGE)]
        if not chunks or not self.columns:
            y = self._header(pdf, 1, 1)
            pdf.setFont("Helvetica", 11)
            pdf.drawCentredString(self.width / 2, y, "No data available")
            pdf.showPage()
        for page, chunk in enumerate(chunks if self.columns else [], start=1):
            y = self._header(pdf, page, len(chunks))
            table = self._table(chunk)
            _, table_height = table.wrapOn(pdf, self.width, self.height)
            table.drawOn(pdf, 1.5 * cm, y - table_height)
            pdf.showPage()

        pdf.save()
        return buffer.getvalue()
