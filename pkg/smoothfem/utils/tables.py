import csv
import io
import logging

import numpy as np

logger = logging.getLogger('tables')


def format_value(value):
    """Shortest round-trip text; empty for missing values"""
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def format_csv(rows, fields):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(fields)
    for row in rows:
        writer.writerow([format_value(row.get(name)) for name in fields])
    return buffer.getvalue()


def write_csv(rows, fields, path):
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(format_csv(rows, fields))
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path
