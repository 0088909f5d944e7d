"""
Running scenarios: barrier construction, beginning condition, solve, checks, artifacts.
"""
import inspect
import logging
import os.path
import time

import numpy as np
from django.utils import timezone

from ..analysis.downloads import verdict_summary, write_check_artifacts, write_json
from ..analysis.registry import CheckRegistry
from ..barriers.checks import beginning_condition_check, sandwich_check
from ..barriers.maxwellian import MaxwellianBarrier
from ..barriers.vacuum import VacuumBarrier
from ..collision.quadrature import CollisionQuadrature
from ..phase.containers import write_field_container
from ..phase.fields import sample_maxwellian
from ..phase.grids import MaxwellianSpec
from ..solver.iteration import ks_solve, ks_solve_with_residual_control
from ..taskapp.utils import get_tracked_versions
from ..taskapp.workers import CellPool
from ..utils import DomainError, make_verdict

_log = logging.getLogger(__name__)

FIELDS_FILENAME = 'fields.csv'
REPORT_FILENAME = 'report.json'
BARRIERS_FILENAME = 'barriers.json'
MANIFEST_FILENAME = 'manifest.json'

# configuration keys a check may take as keyword arguments
CHECK_PARAMETERS = ('p', 'q_exponent', 'r', 'samples')


class Problem:
    """Initial datum and barrier of a scenario, possibly with the datum scaled by 1 + delta."""

    def __init__(self, config, delta=0.):
        self.config = config
        self.factor = 1 + delta
        grid, kernel, regime = config.grid, config.kernel, config.regime
        if config.mode == 'near_vacuum':
            spec = MaxwellianSpec(self.factor * regime['amplitude'], regime['datum_alpha'], regime['datum_beta'])
            self.lab_datum = sample_maxwellian([spec], grid)
            self.datum = sample_maxwellian([spec], grid, frame='trajectory')
            self.barrier = VacuumBarrier.build(self.lab_datum, kernel, regime['alpha'], regime['beta'])
        else:
            # the construction lives on t >= 1, f₀(x, v) = M(x − v, v)
            M = regime['M'].scaled(self.factor)
            self.lab_datum = sample_maxwellian([M], grid)
            self.datum = sample_maxwellian([M], grid, t=1., frame='trajectory')
            self.barrier = MaxwellianBarrier.build(regime['M'], regime['M1'], regime['M2'], regime['eps'], kernel)

    def sandwich(self):
        """Sandwich verdict of the lab-frame datum, None near vacuum."""
        if self.config.mode == 'near_vacuum':
            return None
        regime = self.config.regime
        return sandwich_check(self.lab_datum, regime['M1'], regime['M2'], regime['eps'], regime['M'])

    def solve(self, q, Nt=None):
        """Residual-controlled solve, or a plain solve with exactly Nt steps if Nt is given."""
        solver = self.config.solver
        if Nt is not None:
            return ks_solve(self.datum, self.barrier, T=solver['T'], Nt=Nt, q=q, tol=solver['tol'],
                            max_iter=solver['max_iter'], envelope_rtol=solver['envelope_rtol'])
        return ks_solve_with_residual_control(self.datum, self.barrier, T=solver['T'], Nt=solver['Nt'], q=q,
                                              tol=solver['tol'], max_iter=solver['max_iter'],
                                              residual_tol=solver['residual_tol'],
                                              envelope_rtol=solver['envelope_rtol'])


def check_kwargs(func, checks):
    """The configured parameters that func accepts."""
    parameters = inspect.signature(func).parameters
    return {name: checks[name] for name in CHECK_PARAMETERS if name in parameters and name in checks}


class _Subjects:
    """Lazy subjects of the checks; the perturbed run is only computed for pair checks."""

    def __init__(self, config, run, q, timings):
        self._config = config
        self._run = run
        self._q = q
        self._timings = timings
        self._pair = None

    def get(self, subject_type):
        if subject_type == 'rng':
            return np.random.default_rng(self._config.output['seed'])
        if subject_type == 'run':
            return self._run
        if self._pair is None:
            delta = self._config.checks['delta']
            _log.info("Solving the perturbed problem (delta=%g) for pair checks.", delta)
            start_time = time.perf_counter()
            # same time grid as the main run
            other = Problem(self._config, delta=delta).solve(self._q, Nt=len(self._run.solution.times) - 1)
            self._timings['perturbed_solve'] = time.perf_counter() - start_time
            self._pair = (self._run, other)
        return self._pair


def run_checks(config, run, q, directory, timings):
    """Evaluate the configured checks, write their artifacts and return the verdicts."""
    registry = CheckRegistry()
    subjects = _Subjects(config, run, q, timings)
    verdicts = []
    for name in config.checks['names']:
        subject_type = registry.subject_type(name)
        func = registry.get_implementation(name, subject_type)
        kwargs = check_kwargs(func, config.checks)
        _log.info("Evaluating check '%s' with %s.", name, kwargs)
        start_time = time.perf_counter()
        try:
            verdict = func(subjects.get(subject_type), q, **kwargs)
        except DomainError as exc:
            # outside the domain of the estimate: skipped, not failed
            _log.warning("Check '%s' skipped, not applicable: %s", name, exc)
            verdict = make_verdict(name, True, skipped=True, reason=str(exc))
        timings[f'check_{name}'] = time.perf_counter() - start_time
        write_check_artifacts(verdict, directory, registry.get_flavor(name))
        verdicts.append(verdict_summary(verdict))
    return verdicts


def perform_scenario(config, output_directory=None, workers=None):
    """Run a validated scenario and write its artifacts.

    :param config: ScenarioConfig
    :param output_directory: artifact root, default from the configuration
    :param workers: worker pool size, default from the configuration
    :return: dict with 'directory', 'passed', 'verdicts' and 'manifest'

    Artifacts below <root>/<name>/: fields.csv (+ sidecar), report.json,
    barriers.json, traces/* and manifest.json. Only the manifest carries
    timings and versions.
    """
    started = timezone.now()
    root = output_directory or config.output['directory']
    directory = os.path.join(root, config.name)
    timings = {}
    verdicts = []
    workers = workers or config.output['workers']
    _log.info("Scenario '%s' (%s) with %d worker(s), artifacts in '%s'.", config.name, config.mode, workers,
              directory)

    with CellPool(workers) as pool:
        q = CollisionQuadrature(config.kernel, config.grid, Nsigma=config.Nsigma, pool=pool)

        start_time = time.perf_counter()
        problem = Problem(config)
        timings['barrier'] = time.perf_counter() - start_time
        # nothing is written for a problem that cannot be set up
        os.makedirs(directory, exist_ok=True)
        write_json(os.path.join(directory, BARRIERS_FILENAME), problem.barrier.to_dict())

        sandwich = problem.sandwich()
        if sandwich is not None:
            verdicts.append(sandwich)

        start_time = time.perf_counter()
        beginning = beginning_condition_check(problem.barrier, problem.datum, q, config.solver['T'],
                                              config.solver['Nt'], samples=config.checks['beginning_samples'],
                                              seed=config.output['seed'],
                                              envelope_rtol=config.solver['envelope_rtol'])
        timings['beginning_condition'] = time.perf_counter() - start_time
        verdicts.append(beginning)

        report = dict(config=config.to_dict(), beginning_condition=beginning)
        if all(v['pass'] for v in verdicts):
            start_time = time.perf_counter()
            run = problem.solve(q)
            timings['solve'] = time.perf_counter() - start_time
            report['iteration'] = run.report.to_dict()
            write_field_container(os.path.join(directory, FIELDS_FILENAME), run.lab_series().fields())
            verdicts.append(make_verdict('convergence', run.report.converged and run.report.sandwich['passed'],
                                         iterations=run.report.iterations, gaps=run.report.gaps,
                                         sandwich=run.report.sandwich, traveling=run.report.traveling))
            verdicts += run_checks(config, run, q, directory, timings)
        else:
            _log.warning("Hard check failed before the solve, skipping the Kaniel-Shinbrot iteration.")

    passed = all(v['pass'] for v in verdicts)
    report['verdicts'] = verdicts
    report['passed'] = passed
    write_json(os.path.join(directory, REPORT_FILENAME), report)

    manifest = dict(scenario=config.name, started=started.isoformat(), versions=get_tracked_versions(),
                    workers=workers, timings=timings,
                    verdicts={v['name']: v['pass'] for v in verdicts}, passed=passed,
                    artifacts=sorted(os.listdir(directory)))
    write_json(os.path.join(directory, MANIFEST_FILENAME), manifest)
    _log.info("Scenario '%s' %s.", config.name, "passed" if passed else "FAILED")
    return dict(directory=directory, passed=passed, verdicts=verdicts, manifest=manifest)


def perform_benchmark(config, workers=(1, 2, 4), repeats=3):
    """Throughput of the gain quadrature over the configured grid.

    Reports cells per second (x-cells times v-cells over the best of
    `repeats` timings) for each worker count, whether all results agree
    bit for bit, and the cost ratio of doubling Nsigma with one worker.
    """
    grid = config.grid
    F = Problem(config).lab_datum.matrix
    cells = grid.nx_cells * grid.nv_cells

    def best_time(q):
        times = []
        results = []
        for _ in range(repeats):
            start_time = time.perf_counter()
            results.append(q.gain_matrix(F, F))
            times.append(time.perf_counter() - start_time)
        return min(times), results

    rows = []
    reference = None
    deterministic = True
    for w in workers:
        with CellPool(w) as pool:
            q = CollisionQuadrature(config.kernel, grid, Nsigma=config.Nsigma, pool=pool)
            start_time = time.perf_counter()
            q.gain_table
            table_time = time.perf_counter() - start_time
            elapsed, results = best_time(q)
        if reference is None:
            reference = results[0]
        deterministic &= all(np.array_equal(r, reference) for r in results)
        rows.append(dict(workers=w, seconds=elapsed, cells_per_second=cells / elapsed, table_seconds=table_time))
        _log.info("Gain quadrature with %d worker(s): %.3g cells/s.", w, cells / elapsed)

    per_cell = {}
    for nsigma in (config.Nsigma, 2 * config.Nsigma):
        q = CollisionQuadrature(config.kernel, grid, Nsigma=nsigma, pool=CellPool(1))
        start_time = time.perf_counter()
        q.gain_table
        per_cell[nsigma] = (time.perf_counter() - start_time) / grid.nv_cells

    throughput = [row['cells_per_second'] for row in rows]
    return dict(scenario=config.name, cells=cells, repeats=repeats, rows=rows, deterministic=bool(deterministic),
                monotone=bool(all(a <= b for a, b in zip(throughput[:-1], throughput[1:]))),
                nsigma_cost_ratio=per_cell[2 * config.Nsigma] / per_cell[config.Nsigma])
