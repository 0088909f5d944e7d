import logging
import math
import os.path

import factory

import kinbarrier.scenarios

_log = logging.getLogger(__name__)

FIXTURE_DIR = os.path.join(os.path.dirname(kinbarrier.scenarios.__file__), 'fixtures')


#
# Define factories for creating configuration blocks
#
class TopBlockFactory(factory.DictFactory):
    name = factory.Sequence(lambda n: f"scenario-{n}")


class KernelBlockFactory(factory.DictFactory):
    # noinspection PyMissingOrEmptyDocstring
    class Meta:
        rename = {'lam': 'lambda'}

    dim = 2
    lam = 0.5
    angular_form = 'constant'
    angular_value = 1 / (2 * math.pi)


class GridBlockFactory(factory.DictFactory):
    Lx = 3.
    Lv = 3.
    Nx = 6
    Nv = 6
    Nsigma = 8


class VacuumRegimeBlockFactory(factory.DictFactory):
    mode = 'near_vacuum'
    alpha = 1.
    beta = 1.
    smallness = 0.8


class MaxwellianRegimeBlockFactory(factory.DictFactory):
    mode = 'near_maxwellian'
    eps = 0.05
    M_C = 0.05
    M_alpha = 1.
    M_beta = 1.
    M1_C = 0.049
    M1_alpha = 1.02
    M1_beta = 1.02
    M2_C = 0.051
    M2_alpha = 0.98
    M2_beta = 0.98


class SolverBlockFactory(factory.DictFactory):
    T = 2.
    Nt = 8


class ChecksBlockFactory(factory.DictFactory):
    names = ['lgamma_decay', 'collision_invariants']


class ScenarioBlocksFactory(factory.DictFactory):
    """Blocks of a small near-vacuum scenario, as returned by split_blocks."""

    # noinspection PyMissingOrEmptyDocstring
    class Meta:
        rename = {'top': ''}

    top = factory.SubFactory(TopBlockFactory)
    kernel = factory.SubFactory(KernelBlockFactory)
    grid = factory.SubFactory(GridBlockFactory)
    regime = factory.SubFactory(VacuumRegimeBlockFactory)
    solver = factory.SubFactory(SolverBlockFactory)
    checks = factory.SubFactory(ChecksBlockFactory)


def _format_value(value):
    if isinstance(value, (list, tuple)):
        return '[' + ', '.join(_format_value(v) for v in value) + ']'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    return str(value)


def write_config(filename, blocks):
    """Write blocks in configuration file syntax, the inverse of read_config_file + split_blocks."""
    lines = [f'{key} = {_format_value(value)}' for key, value in blocks.get('', {}).items()]
    for block, entries in blocks.items():
        if not block:
            continue
        lines.append(f'[{block}]')
        for key, value in entries.items():
            if block == 'regime' and key.split('_')[0] in ('M', 'M1', 'M2') or \
                    block == 'kernel' and key.startswith('angular_'):
                key = key.replace('_', '.', 1)
            lines.append(f'{key} = {_format_value(value)}')
    with open(filename, 'w') as fp:
        fp.write('\n'.join(lines) + '\n')
    return filename
