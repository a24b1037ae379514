# serializers.py
from rest_framework import serializers

from dual_solver.models import SolverOptions
from dual_solver.serializers import FiniteFloatField, SolverOptionsSerializer
from scenarios.models import CACHE_STRATEGIES
from scenarios.serializers import ScenarioConfigSerializer, scenario_config_from_data
from utils.serialization import check_header, parse_json, render_json, validated

from .models import DROP_STATUSES, SWEEP_CACHE_SIZE, SWEEP_PARAMS, DropRecord, SweepPoint, SweepResult, SweepSpec

RESULTS_FORMAT = 'cran-sweep-results'
RESULTS_VERSION = 1


class SweepSpecSerializer(serializers.Serializer):
    param = serializers.ChoiceField(choices=SWEEP_PARAMS)
    values = serializers.ListField(child=serializers.FloatField())
    strategies = serializers.ListField(child=serializers.ChoiceField(choices=CACHE_STRATEGIES))
    num_drops = serializers.IntegerField(min_value=1)
    seed = serializers.IntegerField(min_value=0)
    template = ScenarioConfigSerializer()
    solver = SolverOptionsSerializer()


class DropRecordSerializer(serializers.Serializer):
    drop = serializers.IntegerField(min_value=0)
    status = serializers.ChoiceField(choices=DROP_STATUSES)
    total_power = serializers.FloatField(allow_null=True)
    dual_bound = FiniteFloatField(allow_null=True)
    gap = serializers.FloatField(allow_null=True)
    iterations = serializers.IntegerField(min_value=0)
    cache_hit_ratio = serializers.FloatField(allow_null=True)
    error = serializers.CharField(allow_null=True, allow_blank=True)


class SweepPointSerializer(serializers.Serializer):
    """One (strategy, value) pair: aggregates for readers, records for reloading."""
    strategy = serializers.ChoiceField(choices=CACHE_STRATEGIES)
    value = serializers.FloatField()
    n_drops = serializers.IntegerField(read_only=True)
    n_feasible = serializers.IntegerField(read_only=True)
    n_infeasible = serializers.IntegerField(read_only=True)
    n_unconverged = serializers.IntegerField(read_only=True)
    mean_power = serializers.FloatField(read_only=True, allow_null=True)
    stderr = serializers.FloatField(read_only=True, allow_null=True)
    mean_gap = serializers.FloatField(read_only=True, allow_null=True)
    records = DropRecordSerializer(many=True)


class SweepResultSerializer(serializers.Serializer):
    format = serializers.CharField(write_only=True)
    version = serializers.IntegerField(write_only=True)
    spec = SweepSpecSerializer()
    success_ratio = serializers.FloatField(read_only=True)
    points = SweepPointSerializer(many=True)

    def to_representation(self, instance):
        return {'format': RESULTS_FORMAT, 'version': RESULTS_VERSION, **super().to_representation(instance)}


def spec_from_data(attrs):
    return SweepSpec(
        param=attrs['param'],
        values=tuple(attrs['values']),
        template=scenario_config_from_data(attrs['template']),
        strategies=tuple(attrs['strategies']),
        num_drops=attrs['num_drops'],
        seed=attrs['seed'],
        solver=SolverOptions.from_mapping(attrs['solver']),
    )


def result_from_data(data):
    check_header(data, RESULTS_FORMAT, {RESULTS_VERSION})
    attrs = validated(SweepResultSerializer, data)
    spec = spec_from_data(attrs['spec'])
    points = []
    for point in attrs['points']:
        value = int(point['value']) if spec.param == SWEEP_CACHE_SIZE else point['value']
        records = tuple(DropRecord(strategy=point['strategy'], value=value, **record) for record in point['records'])
        points.append(SweepPoint(strategy=point['strategy'], value=value, records=records))
    return SweepResult(spec=spec, points=tuple(points))


def dump_results(result):
    return render_json(SweepResultSerializer(result).data)


def load_results(raw):
    return result_from_data(parse_json(raw))
