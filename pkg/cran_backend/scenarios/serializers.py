# serializers.py
from django.core.exceptions import ValidationError
from rest_framework import serializers

from core_model.models import ChannelState, ContentState, SystemConfig
from utils.serialization import (
    ComplexTensorField, FloatListField, IntListField, MatrixField,
    check_header, parse_json, render_json, validated,
)

from .models import (
    CACHE_STRATEGIES, LAYOUT_CENTER_PLUS_VERTICES, LAYOUT_CUSTOM, SEED_MAX,
    ChannelConfig, GeometryConfig, Scenario, ScenarioConfig, Topology,
)

SCENARIO_FORMAT = 'cran-scenario'
SCENARIO_VERSION = 1


class GeometrySerializer(serializers.Serializer):
    rrh_region_side = serializers.FloatField()
    user_region_side = serializers.FloatField()
    rrh_layout = serializers.ChoiceField(choices=[LAYOUT_CENTER_PLUS_VERTICES, LAYOUT_CUSTOM])
    rrh_positions = serializers.ListField(child=FloatListField(min_length=2, max_length=2), required=False)


class ChannelConfigSerializer(serializers.Serializer):
    carrier = serializers.FloatField()
    pathloss_fixed_db = serializers.FloatField()
    pathloss_slope_db = serializers.FloatField()
    shadowing_std_db = serializers.FloatField()
    noise_psd_dbm_hz = serializers.FloatField()
    noise_figure_db = serializers.FloatField()
    num_taps = serializers.IntegerField(allow_null=True)
    tap_decay_db = serializers.FloatField()
    min_distance = serializers.FloatField()


class ScenarioConfigSerializer(serializers.Serializer):
    """
    Generation parameters as written into scenario files:
    - counts and rates in SI units (Hz, bits/s)
    - nested geometry and channel blocks
    """
    num_rrhs = serializers.IntegerField()
    num_users = serializers.IntegerField()
    num_subchannels = serializers.IntegerField()
    num_contents = serializers.IntegerField()
    bandwidth = serializers.FloatField()
    fronthaul_capacity = serializers.FloatField()
    min_rate = serializers.FloatField()
    cache_size = serializers.IntegerField()
    zipf_exponent = serializers.FloatField()
    cache_strategy = serializers.ChoiceField(choices=CACHE_STRATEGIES)
    geometry = GeometrySerializer()
    channel = ChannelConfigSerializer()


class SystemConfigSerializer(serializers.Serializer):
    num_rrhs = serializers.IntegerField()
    num_users = serializers.IntegerField()
    num_subchannels = serializers.IntegerField()
    num_contents = serializers.IntegerField()
    bandwidth = serializers.FloatField()
    noise_power = serializers.FloatField()
    fronthaul_capacity = FloatListField()
    min_rate = FloatListField()
    cache_size = serializers.IntegerField()


class TopologySerializer(serializers.Serializer):
    rrh_positions = MatrixField()
    user_positions = MatrixField(allow_empty=True)


class ChannelStateSerializer(serializers.Serializer):
    shape = IntListField(min_length=3, max_length=3)
    coefficients = ComplexTensorField()

    def validate(self, attrs):
        if tuple(attrs['coefficients'].shape) != tuple(attrs['shape']):
            raise serializers.ValidationError(
                f"coefficients have shape {attrs['coefficients'].shape}, header says {attrs['shape']}")
        return attrs


class ContentStateSerializer(serializers.Serializer):
    cache = MatrixField(child=IntListField())
    requested = IntListField()
    popularity = FloatListField()


class ScenarioFileSerializer(serializers.Serializer):
    format = serializers.CharField(write_only=True)
    version = serializers.IntegerField(write_only=True)
    seed = serializers.IntegerField(min_value=0, max_value=SEED_MAX)
    drop = serializers.IntegerField(min_value=0)
    config = ScenarioConfigSerializer()
    system = SystemConfigSerializer()
    topology = TopologySerializer()
    channel = ChannelStateSerializer()
    content = ContentStateSerializer()

    def to_representation(self, instance):
        return {'format': SCENARIO_FORMAT, 'version': SCENARIO_VERSION, **super().to_representation(instance)}


def scenario_config_from_data(data):
    data = dict(data)
    geometry = GeometryConfig(**data.pop('geometry'))
    channel = ChannelConfig(**data.pop('channel'))
    return ScenarioConfig(geometry=geometry, channel=channel, **data)


def scenario_to_data(scenario):
    return ScenarioFileSerializer(scenario).data


def scenario_from_data(data):
    check_header(data, SCENARIO_FORMAT, {SCENARIO_VERSION})
    attrs = validated(ScenarioFileSerializer, data)
    content = attrs['content']
    try:
        return Scenario(
            config=scenario_config_from_data(attrs['config']),
            seed=attrs['seed'],
            drop=attrs['drop'],
            topology=Topology(**attrs['topology']),
            system=SystemConfig(**attrs['system']),
            channel=ChannelState(attrs['channel']['coefficients']),
            content=ContentState.build(content['requested'], content['cache'], content['popularity']),
        )
    except TypeError as exc:
        raise ValidationError(f"malformed scenario file: {exc}") from exc


def dump_scenario(scenario):
    return render_json(scenario_to_data(scenario))


def load_scenario(raw):
    return scenario_from_data(parse_json(raw))
