"""
Import and export distribution fields through "field containers":
a flat CSV with header t,ix...,iv...,value and a JSON sidecar with grid metadata.
"""
import json
import logging
import os.path

import numpy as np
import pandas as pd

from .grids import PhaseGrid
from .fields import DistributionField

_log = logging.getLogger(__name__)

CONTAINER_FORMAT_VERSION = 1
FLOAT_FORMAT = '%.17g'  # shortest format that round-trips every double


def sidecar_path(csv_path):
    root, _ = os.path.splitext(csv_path)
    return root + '.json'


def _column_names(n):
    return ['t'] + [f'ix{d}' for d in range(n)] + [f'iv{d}' for d in range(n)] + ['value']


def write_field_container(csv_path, fields):
    """Write fields (same grid and frame) to a CSV file plus JSON sidecar.

    Parameters
    ----------
    csv_path: str
        Name of the CSV file, the sidecar gets the suffix ".json".
    fields: sequence of DistributionField

    Returns
    -------
    None
    """
    grid = fields[0].grid
    frame = fields[0].frame
    n = grid.n
    indices = np.indices(grid.shape).reshape(2 * n, -1)

    frames = []
    for f in fields:
        if f.grid != grid or f.frame != frame:
            raise ValueError("All fields in one container must share grid and frame.")
        columns = {'t': np.full(indices.shape[1], float(f.t))}
        for d in range(n):
            columns[f'ix{d}'] = indices[d]
            columns[f'iv{d}'] = indices[n + d]
        columns['value'] = f.values.ravel()
        frames.append(pd.DataFrame(columns, columns=_column_names(n)))

    df = pd.concat(frames, ignore_index=True)
    df.to_csv(csv_path, index=False, float_format=FLOAT_FORMAT)

    meta = dict(format_version=CONTAINER_FORMAT_VERSION, grid=grid.to_dict(), frame=frame,
                times=[float(f.t) for f in fields], columns=_column_names(n))
    with open(sidecar_path(csv_path), 'w') as fp:
        json.dump(meta, fp, indent=2, sort_keys=True)
    _log.debug("Wrote %d fields to '%s'.", len(fields), csv_path)


def read_field_container(csv_path):
    """Read fields written by `write_field_container`.

    Returns
    -------
    list of DistributionField, in the order they were written
    """
    with open(sidecar_path(csv_path)) as fp:
        meta = json.load(fp)
    grid = PhaseGrid(**meta['grid'])
    n = grid.n
    df = pd.read_csv(csv_path, float_precision='round_trip')
    if list(df.columns) != _column_names(n):
        raise ValueError(f"Unexpected columns {list(df.columns)} in '{csv_path}'.")

    block = int(np.prod(grid.shape))
    fields = []
    for k, t in enumerate(meta['times']):
        part = df.iloc[k * block:(k + 1) * block]
        values = np.zeros(grid.shape)
        idx = tuple(part[f'ix{d}'].to_numpy() for d in range(n)) + \
            tuple(part[f'iv{d}'].to_numpy() for d in range(n))
        values[idx] = part['value'].to_numpy()
        fields.append(DistributionField(grid, float(part['t'].iloc[0]) if len(part) else t, values, meta['frame']))
    return fields
