"""
Run configuration: YAML file (or shipped preset) + flat key=value overrides,
validated with DRF serializers the way request payloads are.

A config file looks like:

    seed: 7
    system:
      num_rrhs: 3
      bandwidth: 20 MHz
      fronthaul_capacity: 40 Mbps
    content:
      zipf_exponent: 0.9
      cache_strategy: most_popular
    solver:
      mode: exhaustive
    sweep:
      param: fronthaul_capacity
      values: [30 Mbps, 40 Mbps, 60 Mbps]
      strategies: [most_popular, none]
      num_drops: 20

Every section is optional; omitted entries keep the model defaults.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml
from django.core.exceptions import ValidationError
from rest_framework import serializers

from dual_solver.models import MODES as SOLVER_MODES
from experiments.models import SWEEP_FRONTHAUL, SWEEP_PARAMS
from scenarios.models import (
    CACHE_STRATEGIES, LAYOUT_CENTER_PLUS_VERTICES, LAYOUT_CUSTOM, SEED_MAX,
    ChannelConfig, GeometryConfig, ScenarioConfig,
)

from . import units
from .serialization import validated

logger = logging.getLogger(__name__)

# override keys whose value is a comma-separated list
LIST_KEYS = {'sweep.values', 'sweep.strategies'}


class QuantityField(serializers.Field):
    default_error_messages = {'unit': '{message}'}

    def __init__(self, kind, **kwargs):
        self.kind = kind
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        try:
            return units.parse_quantity(data, self.kind)
        except ValidationError as exc:
            self.fail('unit', message=' '.join(exc.messages))

    def to_representation(self, value):
        return units.format_quantity(value, self.kind)


class StrictSerializer(serializers.Serializer):
    """Refuses keys it does not declare, so a typo never silently falls back to a default."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ["unknown key"] for key in unknown})
        return super().to_internal_value(data)


class SystemSection(StrictSerializer):
    num_rrhs = serializers.IntegerField(min_value=1, required=False)
    num_users = serializers.IntegerField(min_value=1, required=False)
    num_subchannels = serializers.IntegerField(min_value=1, required=False)
    num_contents = serializers.IntegerField(min_value=1, required=False)
    bandwidth = QuantityField(units.FREQUENCY, required=False)
    fronthaul_capacity = QuantityField(units.RATE, required=False)
    min_rate = QuantityField(units.RATE, required=False)
    cache_size = serializers.IntegerField(min_value=0, required=False)


class ContentSection(StrictSerializer):
    zipf_exponent = serializers.FloatField(min_value=0, required=False)
    cache_strategy = serializers.ChoiceField(choices=CACHE_STRATEGIES, required=False)


class GeometrySection(StrictSerializer):
    rrh_region_side = QuantityField(units.LENGTH, required=False)
    user_region_side = QuantityField(units.LENGTH, required=False)
    rrh_layout = serializers.ChoiceField(choices=[LAYOUT_CENTER_PLUS_VERTICES, LAYOUT_CUSTOM], required=False)
    rrh_positions = serializers.ListField(
        child=serializers.ListField(child=QuantityField(units.LENGTH), min_length=2, max_length=2),
        required=False)


class ChannelSection(StrictSerializer):
    carrier = QuantityField(units.FREQUENCY, required=False)
    pathloss_fixed = QuantityField(units.DECIBEL, required=False, source='pathloss_fixed_db')
    pathloss_slope = QuantityField(units.DECIBEL, required=False, source='pathloss_slope_db')
    shadowing_std = QuantityField(units.DECIBEL, required=False, source='shadowing_std_db')
    noise_psd = QuantityField(units.PSD, required=False, source='noise_psd_dbm_hz')
    noise_figure = QuantityField(units.DECIBEL, required=False, source='noise_figure_db')
    num_taps = serializers.IntegerField(min_value=1, allow_null=True, required=False)
    tap_decay = QuantityField(units.DECIBEL, required=False, source='tap_decay_db')
    min_distance = QuantityField(units.LENGTH, required=False)


class SolverSection(StrictSerializer):
    mode = serializers.ChoiceField(choices=SOLVER_MODES, required=False)
    tol = serializers.FloatField(min_value=0, required=False)
    max_iter = serializers.IntegerField(min_value=1, allow_null=True, required=False)
    max_iter_factor = serializers.IntegerField(min_value=1, required=False)
    # dual-space radius of the initial ball; null picks it from the instance
    initial_radius = serializers.FloatField(min_value=0, allow_null=True, required=False)
    radius_safety = serializers.FloatField(min_value=1, required=False)
    gap_floor = QuantityField(units.POWER, required=False)
    recovery_pool = serializers.IntegerField(min_value=1, required=False)
    recovery_width = serializers.IntegerField(min_value=1, required=False)
    recovery_budget = serializers.IntegerField(min_value=0, required=False)
    kkt_tol = serializers.FloatField(min_value=0, required=False)

    def validate_tol(self, value):
        if value <= 0:
            raise serializers.ValidationError("tolerance must be positive")
        return value


class SweepSection(StrictSerializer):
    param = serializers.ChoiceField(choices=SWEEP_PARAMS)
    values = serializers.ListField(child=serializers.JSONField(), min_length=1)
    strategies = serializers.ListField(child=serializers.ChoiceField(choices=CACHE_STRATEGIES), allow_empty=True,
                                       required=False)
    num_drops = serializers.IntegerField(min_value=1, required=False)

    def validate(self, attrs):
        if attrs['param'] == SWEEP_FRONTHAUL:
            parsed = []
            for value in attrs['values']:
                try:
                    parsed.append(units.parse_quantity(value, units.RATE))
                except ValidationError as exc:
                    raise serializers.ValidationError({'values': exc.messages})
        else:
            if not all(isinstance(v, int) and not isinstance(v, bool) or str(v).isdigit() for v in attrs['values']):
                raise serializers.ValidationError({'values': "cache sizes are plain integers"})
            parsed = [int(v) for v in attrs['values']]
        attrs['values'] = parsed
        return attrs


class RunConfigSerializer(StrictSerializer):
    seed = serializers.IntegerField(min_value=0, max_value=SEED_MAX, required=False)
    system = SystemSection(required=False)
    content = ContentSection(required=False)
    geometry = GeometrySection(required=False)
    channel = ChannelSection(required=False)
    solver = SolverSection(required=False)
    sweep = SweepSection(required=False)


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig
    seed: int = 0
    solver: dict = field(default_factory=dict)
    sweep: dict = None


# ── Loading ───────────────────────────────────────────────────

def read_yaml(path):
    path = Path(path)
    try:
        with path.open(encoding='utf-8') as handle:
            data = yaml.safe_load(handle)
    except FileNotFoundError as exc:
        raise ValidationError(f"config file {path} does not exist") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"config file {path} is not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValidationError(f"config file {path} must hold a mapping at the top level")
    return data


def preset_path(name, preset_dir):
    path = Path(preset_dir) / f"{name}.yaml"
    if not path.exists():
        available = sorted(p.stem for p in Path(preset_dir).glob('*.yaml'))
        raise ValidationError(f"unknown preset {name!r}; available: {', '.join(available)}")
    return path


def merge(base, update):
    """Recursive dict merge; `update` wins."""
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def apply_overrides(data, overrides):
    """Apply `section.key=value` strings; values are read as YAML scalars."""
    data = merge({}, data)
    for item in overrides:
        key, sep, raw = item.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ValidationError(f"override {item!r} is not of the form key=value")
        if key in LIST_KEYS:
            value = [yaml.safe_load(part.strip()) for part in raw.split(',') if part.strip()]
        else:
            value = yaml.safe_load(raw) if raw.strip() else None
        *path, leaf = key.split('.')
        node = data
        for part in path:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ValidationError(f"override {key!r} descends into a non-section entry {part!r}")
            node = child
        node[leaf] = value
        logger.debug("override %s=%r", key, value)
    return data


def build_run_config(data):
    attrs = validated(RunConfigSerializer, data)

    geometry = GeometryConfig(**{
        key: tuple(map(tuple, value)) if key == 'rrh_positions' else value
        for key, value in attrs.get('geometry', {}).items()
    })
    channel = ChannelConfig(**attrs.get('channel', {}))
    scenario = ScenarioConfig(
        geometry=geometry,
        channel=channel,
        **attrs.get('system', {}),
        **attrs.get('content', {}),
    )
    return RunConfig(
        scenario=scenario,
        seed=attrs.get('seed', 0),
        solver=dict(attrs.get('solver', {})),
        sweep=dict(attrs['sweep']) if 'sweep' in attrs else None,
    )


def load_run_config(config_path=None, preset=None, overrides=(), preset_dir=None):
    """Preset, then config file, then overrides; the merged mapping is validated once."""
    data = {}
    if preset:
        data = merge(data, read_yaml(preset_path(preset, preset_dir)))
    if config_path:
        data = merge(data, read_yaml(config_path))
    return build_run_config(apply_overrides(data, overrides))
