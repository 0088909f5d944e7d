"""
Writing verdicts and traces of checks to the artifact directory.
"""
import json
import logging
import os.path

import numpy as np
import pandas as pd

from ..phase.containers import FLOAT_FORMAT
from ..utils import jsonable

_log = logging.getLogger(__name__)

TRACES_DIRECTORY = 'traces'


def write_json(path, obj):
    """JSON with sorted keys and indentation 2; numpy types and non-finite floats converted."""
    with open(path, 'w') as fp:
        json.dump(jsonable(obj), fp, indent=2, sort_keys=True)
        fp.write('\n')


def dump_json(obj):
    return json.dumps(jsonable(obj), indent=2, sort_keys=True)


def trace_dataframe(trace):
    """pandas.DataFrame with one column per trace entry, in the order given."""
    columns = {name: np.asarray(values, dtype=float) for name, values in trace.items()}
    lengths = {len(values) for values in columns.values()}
    if len(lengths) > 1:
        raise ValueError(f"Trace columns differ in length: {sorted(lengths)}")
    return pd.DataFrame(columns)


def _write_verdict_only(verdict, directory, basename):
    path = os.path.join(directory, TRACES_DIRECTORY, f'{basename}.json')
    write_json(path, verdict)
    return dict(verdict=path)


def _write_verdict_and_trace(verdict, directory, basename):
    verdict = dict(verdict)
    trace = verdict.pop('trace', None)
    paths = _write_verdict_only(verdict, directory, basename)
    if trace is not None:
        csv_path = os.path.join(directory, TRACES_DIRECTORY, f'{basename}.csv')
        trace_dataframe(trace).to_csv(csv_path, index=False, float_format=FLOAT_FORMAT)
        paths['trace'] = csv_path
    return paths


def write_check_artifacts(verdict, directory, flavor, basename=None):
    """Write the verdict of a check (and its trace for flavor 'trace') below directory/traces.

    :param verdict: dict as returned by a check implementation
    :param directory: scenario directory
    :param flavor: flavor of the check as registered, see registry.CHECK_FLAVORS
    :param basename: file name without suffix, default is the verdict's name
    :return: dict with written paths
    """
    write_functions = {
        'verdict': _write_verdict_only,
        'trace': _write_verdict_and_trace,
    }
    if flavor not in write_functions:
        raise ValueError(f"Cannot write artifacts for check flavor '{flavor}'.")
    os.makedirs(os.path.join(directory, TRACES_DIRECTORY), exist_ok=True)
    paths = write_functions[flavor](verdict, directory, basename or verdict['name'])
    _log.debug("Wrote artifacts %s.", paths)
    return paths


def verdict_summary(verdict):
    """The verdict without its trace, as embedded in reports and manifests."""
    return {key: value for key, value in verdict.items() if key != 'trace'}
