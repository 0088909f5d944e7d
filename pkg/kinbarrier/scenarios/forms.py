"""
Validation of scenario configurations.

Every block of a configuration file is validated by its own form; all
blocks are validated before an error is raised, so a rejected
configuration lists every violation at once.
"""
import json
import logging
import math
from dataclasses import dataclass, field

from django import forms
from django.conf import settings
from django.core.exceptions import ValidationError

from ..analysis.registry import CheckRegistry
from ..barriers.maxwellian import check_barrier_parameters
from ..barriers.vacuum import k_alpha_beta
from ..collision.quadrature import MIN_SIGMA_NODES
from ..kernel.kernels import ANGULAR_FORMS, KERNEL_MODES, AngularKernel, CollisionKernel, KernelDomainError, \
    symmetrize
from ..phase.grids import MaxwellianSpec, PhaseGrid
from ..utils import DomainError
from .configfile import ConfigFileError, read_config_file, split_blocks

_log = logging.getLogger(__name__)

DEFAULT_CHECKS = ('gradient_gronwall', 'velocity_gradient', 'weighted_gradient', 'lgamma_decay', 'stability',
                  'collision_invariants')
GRADIENT_CHECKS = {'gradient_gronwall', 'velocity_gradient'}
ANGULAR_CHOICES = [(f, f) for f in ANGULAR_FORMS if f != 'symmetrized']
DEFAULT_PERTURBATION = 1e-3
DEFAULT_ENVELOPE_RTOL = 5e-2


class ConfigurationError(Exception):
    """A scenario configuration was rejected.

    errors maps block names to {field: [{"message": ..., "code": ...}]}.
    """

    def __init__(self, errors):
        self.errors = errors

    def __str__(self):
        return "Invalid scenario configuration: " + json.dumps(self.errors, sort_keys=True)


class ExponentField(forms.FloatField):
    """Float field accepting +inf, for Lebesgue exponents."""

    def validate(self, value):
        if value == math.inf:
            return
        super().validate(value)

    def to_python(self, value):
        if isinstance(value, str) and value.strip().lower() in ('inf', '+inf'):
            return math.inf
        return super().to_python(value)


class ListField(forms.Field):
    """A YAML sequence of floats."""

    def to_python(self, value):
        if value in self.empty_values:
            return ()
        if not isinstance(value, (list, tuple)):
            raise ValidationError("Enter a list of numbers.", code='invalid')
        try:
            return tuple(float(v) for v in value)
        except (TypeError, ValueError):
            raise ValidationError("Enter a list of numbers.", code='invalid')


class ScenarioForm(forms.Form):
    name = forms.SlugField()


class KernelForm(forms.Form):
    dim = forms.TypedChoiceField(choices=[(2, '2'), (3, '3')], coerce=int)
    angular_form = forms.ChoiceField(choices=ANGULAR_CHOICES, required=False)
    # short spelling of angular.form
    angular = forms.ChoiceField(choices=ANGULAR_CHOICES, required=False)
    angular_value = forms.FloatField(min_value=0, required=False)
    angular_power = forms.FloatField(min_value=0, required=False)
    angular_samples = ListField(required=False)
    symmetrize = forms.BooleanField(required=False)

    def __init__(self, *args, mode='near_vacuum', **kwargs):
        super().__init__(*args, **kwargs)
        # 'lambda' is a keyword, so the field cannot be declared above
        self.fields['lambda'] = forms.FloatField()
        self.mode = mode

    def clean(self):
        cleaned_data = super().clean()
        if self.errors:
            return cleaned_data
        form = cleaned_data.get('angular_form') or cleaned_data.get('angular')
        if not form:
            self.add_error('angular_form', ValidationError("This field is required.", code='required'))
            return cleaned_data
        if cleaned_data.get('angular_form') and cleaned_data.get('angular') not in (None, '', form):
            self.add_error('angular', ValidationError("Conflicts with 'angular.form'.", code='conflict'))
            return cleaned_data
        if form == 'tabulated':
            if not cleaned_data.get('angular_samples'):
                self.add_error('angular_samples', ValidationError("Needed for a tabulated angular kernel.",
                                                                  code='required'))
                return cleaned_data
        elif cleaned_data.get('angular_value') is None:
            self.add_error('angular_value', ValidationError(f"Needed for angular form '{form}'.", code='required'))
            return cleaned_data
        try:
            angular = AngularKernel(form, value=cleaned_data.get('angular_value') or 0.,
                                    power=cleaned_data.get('angular_power') or 0.,
                                    samples=cleaned_data.get('angular_samples') or ())
            if cleaned_data.get('symmetrize'):
                angular = symmetrize(angular)
            cleaned_data['kernel'] = CollisionKernel(lam=cleaned_data['lambda'], angular=angular,
                                                     n=cleaned_data['dim'], mode=self.mode)
        except KernelDomainError as exc:
            field_name = 'lambda' if exc.code == 'soft_potential_range' else 'angular_form'
            self.add_error(field_name, ValidationError(str(exc), code=exc.code))
        return cleaned_data


class GridForm(forms.Form):
    Lx = forms.FloatField(min_value=0)
    Lv = forms.FloatField(min_value=0)
    Nx = forms.IntegerField(min_value=4)
    Nv = forms.IntegerField(min_value=4)
    Nsigma = forms.IntegerField(min_value=MIN_SIGMA_NODES)

    def __init__(self, *args, dim=2, **kwargs):
        super().__init__(*args, **kwargs)
        self.dim = dim

    def clean(self):
        cleaned_data = super().clean()
        if self.errors:
            return cleaned_data
        try:
            cleaned_data['grid'] = PhaseGrid(n=self.dim, Lx=cleaned_data['Lx'], Lv=cleaned_data['Lv'],
                                             Nx=cleaned_data['Nx'], Nv=cleaned_data['Nv'])
        except DomainError as exc:
            raise ValidationError(str(exc), code='grid')
        return cleaned_data


class RegimeForm(forms.Form):
    """Barrier regime and initial datum.

    near_vacuum: f₀ = A·exp(−datum_alpha|x|² − datum_beta|v|²) with the
    amplitude A given directly or as `smallness` times the threshold 1/(4k_{α,β}).

    near_maxwellian: f₀(x, v) = M(x − v, v) with M₁ ≤ f₀ ≤ M₂; keys M_C,
    M_alpha, M_beta and likewise for M1 and M2.
    """
    mode = forms.ChoiceField(choices=[(m, m) for m in KERNEL_MODES])
    # near_vacuum
    alpha = forms.FloatField(required=False)
    beta = forms.FloatField(required=False)
    amplitude = forms.FloatField(min_value=0, required=False)
    smallness = forms.FloatField(min_value=0, required=False)
    datum_alpha = forms.FloatField(required=False)
    datum_beta = forms.FloatField(required=False)
    # near_maxwellian
    eps = forms.FloatField(required=False)

    MAXWELLIANS = ('M', 'M1', 'M2')

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        for name in self.MAXWELLIANS:
            for parameter in ('C', 'alpha', 'beta'):
                self.fields[f'{name}_{parameter}'] = forms.FloatField(required=False)

    def _require(self, names):
        missing = [name for name in names if self.cleaned_data.get(name) is None]
        for name in missing:
            self.add_error(name, ValidationError(f"Needed in mode '{self.cleaned_data['mode']}'.",
                                                 code='required'))
        return not missing

    def clean(self):
        cleaned_data = super().clean()
        if self.errors:
            return cleaned_data
        if cleaned_data['mode'] == 'near_vacuum':
            if not self._require(['alpha', 'beta']):
                return cleaned_data
            alpha, beta = cleaned_data['alpha'], cleaned_data['beta']
            if not alpha > 0:
                self.add_error('alpha', ValidationError("Must be positive.", code='min_value'))
            if not beta > 0:
                self.add_error('beta', ValidationError("beta = 0 is not available near vacuum.",
                                                       code='beta_unavailable'))
            if (cleaned_data.get('amplitude') is None) == (cleaned_data.get('smallness') is None):
                self.add_error(None, ValidationError("Give exactly one of 'amplitude' and 'smallness'.",
                                                     code='amplitude'))
            # defaults: twice the envelope's alpha, its beta
            for name, envelope, default in (('datum_alpha', alpha, 2 * alpha), ('datum_beta', beta, beta)):
                if cleaned_data.get(name) is None:
                    cleaned_data[name] = default
                elif cleaned_data[name] < envelope:
                    self.add_error(name, ValidationError("Datum must decay at least like the envelope.",
                                                         code='envelope'))
        else:
            names = [f'{m}_{p}' for m in self.MAXWELLIANS for p in ('C', 'alpha', 'beta')]
            if not self._require(names + ['eps']):
                return cleaned_data
            try:
                specs = {m: MaxwellianSpec(cleaned_data[f'{m}_C'], cleaned_data[f'{m}_alpha'],
                                           cleaned_data[f'{m}_beta'], shift=1.) for m in self.MAXWELLIANS}
            except DomainError as exc:
                raise ValidationError(str(exc), code='maxwellian')
            cleaned_data.update(specs)
        return cleaned_data

    def clean_with_kernel(self, kernel):
        """Checks needing the collision kernel: smallness near vacuum, the M₁/M₂ bracket near a Maxwellian."""
        data = self.cleaned_data
        if data['mode'] == 'near_vacuum':
            k = k_alpha_beta(data['alpha'], data['beta'], kernel)
            threshold = 1 / (4 * k)
            if data.get('smallness') is not None:
                data['amplitude'] = data['smallness'] * threshold
            data['k_ab'] = k
            if data['amplitude'] > threshold:
                self.add_error('amplitude', ValidationError(
                    f"Smallness violated: ‖f0‖_(alpha,beta) = {data['amplitude']:.6g} exceeds the "
                    f"threshold 1/(4k_(alpha,beta)) = {threshold:.6g}.", code='smallness_violated'))
        else:
            try:
                check_barrier_parameters(data['M'], data['M1'], data['M2'], kernel.lam, kernel.n)
            except DomainError as exc:
                self.add_error(None, ValidationError(str(exc), code='maxwellian_bracket'))


class SolverForm(forms.Form):
    T = forms.FloatField(min_value=0)
    Nt = forms.IntegerField(min_value=2)
    tol = forms.FloatField(min_value=0, required=False)
    max_iter = forms.IntegerField(min_value=1, required=False)
    residual_tol = forms.FloatField(min_value=0, required=False)
    envelope_rtol = forms.FloatField(min_value=0, required=False)

    def clean(self):
        cleaned_data = super().clean()
        for name, default in (('tol', 1e-6), ('max_iter', 40), ('residual_tol', 5e-2)):
            if cleaned_data.get(name) is None:
                cleaned_data[name] = default
        return cleaned_data


class ChecksForm(forms.Form):
    p = ExponentField(required=False)
    q_exponent = ExponentField(required=False)
    r = ExponentField(required=False)
    samples = forms.IntegerField(min_value=1, required=False)
    delta = forms.FloatField(required=False)
    beginning_samples = forms.IntegerField(min_value=1, required=False)

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.fields['names'] = forms.MultipleChoiceField(choices=[(name, name)
                                                                  for name in CheckRegistry().get_names()],
                                                         required=False)

    def clean(self):
        cleaned_data = super().clean()
        if not cleaned_data.get('names') and 'names' not in self.errors:
            cleaned_data['names'] = list(DEFAULT_CHECKS)
        for name, default in (('p', 2.), ('q_exponent', 2.), ('r', 4.), ('samples', 10),
                              ('delta', DEFAULT_PERTURBATION), ('beginning_samples', 16)):
            if cleaned_data.get(name) is None:
                cleaned_data[name] = default
        p = cleaned_data['p']
        if not p >= 1:
            self.add_error('p', ValidationError(f"Exponent must be at least 1, got {p}.", code='exponent'))
        elif not 1 < p < math.inf and GRADIENT_CHECKS & set(cleaned_data.get('names', ())):
            self.add_error('p', ValidationError("Gradient checks need 1 < p < inf.", code='exponent'))
        if not abs(cleaned_data['delta']) < 1:
            self.add_error('delta', ValidationError("Relative perturbation must lie in (-1, 1).", code='delta'))
        return cleaned_data


class OutputForm(forms.Form):
    directory = forms.CharField(required=False)
    seed = forms.IntegerField(min_value=0, required=False)
    workers = forms.IntegerField(min_value=1, required=False)

    def clean(self):
        cleaned_data = super().clean()
        if not cleaned_data.get('directory'):
            cleaned_data['directory'] = settings.KB_OUTPUT_DIR
        if cleaned_data.get('seed') is None:
            cleaned_data['seed'] = 0
        if cleaned_data.get('workers') is None:
            cleaned_data['workers'] = settings.KB_WORKERS
        return cleaned_data


BLOCKS = ('', 'kernel', 'grid', 'regime', 'solver', 'checks', 'output')


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario."""
    name: str
    kernel: CollisionKernel
    grid: PhaseGrid
    Nsigma: int
    regime: dict
    solver: dict
    checks: dict
    output: dict = field(default_factory=dict)

    @property
    def mode(self):
        return self.regime['mode']

    def to_dict(self):
        regime = {key: value.to_dict() if isinstance(value, MaxwellianSpec) else value
                  for key, value in self.regime.items()}
        return dict(name=self.name, kernel=dict(lam=self.kernel.lam, n=self.kernel.n, mode=self.kernel.mode,
                                                angular=repr(self.kernel.angular), norm=self.kernel.norm),
                    grid=self.grid.to_dict(), Nsigma=self.Nsigma, regime=regime, solver=self.solver,
                    checks=self.checks, output=self.output)


def _unknown_keys(form, data):
    return {key: [{'message': "Unknown key.", 'code': 'unknown'}] for key in data if key not in form.fields}


def validate_blocks(blocks):
    """Validate the blocks of a configuration, return a ScenarioConfig or raise ConfigurationError."""
    errors = {}
    for block in blocks:
        if block not in BLOCKS:
            errors[block] = {'__all__': [{'message': f"Unknown block '{block}'.", 'code': 'unknown'}]}

    def data(block):
        return blocks.get(block, {})

    regime_form = RegimeForm(data('regime'))
    regime_ok = regime_form.is_valid()
    mode = regime_form.cleaned_data.get('mode', 'near_vacuum')
    kernel_form = KernelForm(data('kernel'), mode=mode)
    kernel_ok = kernel_form.is_valid()
    forms_by_block = {
        '': ScenarioForm(data('')),
        'kernel': kernel_form,
        'grid': GridForm(data('grid'), dim=kernel_form.cleaned_data.get('dim', 2)),
        'regime': regime_form,
        'solver': SolverForm(data('solver')),
        'checks': ChecksForm(data('checks')),
        'output': OutputForm(data('output')),
    }
    if kernel_ok and regime_ok and not kernel_form.errors:
        regime_form.clean_with_kernel(kernel_form.cleaned_data['kernel'])

    for block, form in forms_by_block.items():
        block_errors = dict(_unknown_keys(form, data(block)))
        if not form.is_valid():
            block_errors.update(form.errors.get_json_data())
        if block_errors:
            errors.setdefault(block, {}).update(block_errors)

    if errors:
        _log.warning("Rejected configuration with errors in blocks %s.", sorted(errors))
        raise ConfigurationError(errors)

    grid_data = forms_by_block['grid'].cleaned_data
    solver = dict(forms_by_block['solver'].cleaned_data)
    if solver.get('envelope_rtol') is None:
        solver['envelope_rtol'] = 0. if mode == 'near_vacuum' else DEFAULT_ENVELOPE_RTOL
    regime = {key: value for key, value in regime_form.cleaned_data.items() if value is not None}
    return ScenarioConfig(name=forms_by_block[''].cleaned_data['name'], kernel=kernel_form.cleaned_data['kernel'],
                          grid=grid_data['grid'], Nsigma=grid_data['Nsigma'], regime=regime, solver=solver,
                          checks=dict(forms_by_block['checks'].cleaned_data),
                          output=dict(forms_by_block['output'].cleaned_data))


def load_scenario(filename):
    """Read and validate a configuration file."""
    try:
        entries = read_config_file(filename)
    except ConfigFileError as exc:
        raise ConfigurationError({'': {'__all__': [{'message': str(exc), 'code': 'syntax'}]}}) from exc
    except OSError as exc:
        raise ConfigurationError({'': {'__all__': [{'message': str(exc), 'code': 'unreadable'}]}}) from exc
    return validate_blocks(split_blocks(entries))
