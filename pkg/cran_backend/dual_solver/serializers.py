# serializers.py
import math

from rest_framework import serializers

from core_model.serializers import AllocationSerializer, FeasibilityReportSerializer, SkeletonSerializer
from utils.serialization import FloatListField, IntListField, check_header, parse_json, render_json, validated

from .models import MODES

REPORT_FORMAT = 'cran-solver-report'
REPORT_VERSION = 1

# gap_floor is an absolute floor in W under |g|
STOPPING_RULE = "uncertainty <= tol * max(gap_floor, |g|)"


class FiniteFloatField(serializers.FloatField):
    """Float written as null when it is not finite (JSON has no inf)."""

    def to_representation(self, value):
        value = float(value)
        return value if math.isfinite(value) else None


class SolverOptionsSerializer(serializers.Serializer):
    mode = serializers.ChoiceField(choices=MODES)
    tol = serializers.FloatField()
    max_iter = serializers.IntegerField(allow_null=True)
    max_iter_factor = serializers.IntegerField()
    initial_radius = serializers.FloatField(allow_null=True)
    radius_safety = serializers.FloatField()
    gap_floor = serializers.FloatField()
    recovery_pool = serializers.IntegerField()
    recovery_width = serializers.IntegerField()
    recovery_budget = serializers.IntegerField()
    kkt_tol = serializers.FloatField()
    feasibility_tol = serializers.FloatField()


class DualResultSerializer(serializers.Serializer):
    """Ellipsoid outcome: best multipliers, their g and the g trajectory."""
    status = serializers.CharField()
    message = serializers.CharField(allow_blank=True)
    iterations = serializers.IntegerField()
    initial_radius = serializers.FloatField()
    uncertainty = FiniteFloatField(allow_null=True)
    threshold = FiniteFloatField(allow_null=True)
    stopping_rule = serializers.SerializerMethodField()
    bound = serializers.FloatField(source='best_value')
    pairs = serializers.ListField(child=IntListField(min_length=2, max_length=2), source='dual.index.pairs')
    lam = FloatListField(source='dual.lam')
    mu = FloatListField(source='dual.mu')
    pool_size = serializers.SerializerMethodField()
    trajectory = FloatListField()
    best_trajectory = FloatListField()

    def get_pool_size(self, obj):
        return len(obj.pool)

    def get_stopping_rule(self, obj):
        return STOPPING_RULE


class RecoverySerializer(serializers.Serializer):
    status = serializers.CharField()
    cause = serializers.CharField(allow_null=True)
    total_power = serializers.FloatField(allow_null=True)
    kkt_residual = serializers.FloatField(allow_null=True)
    certified = serializers.BooleanField()
    candidates_tried = serializers.IntegerField()
    skeleton = SkeletonSerializer(allow_null=True)
    allocation = AllocationSerializer(allow_null=True)
    feasibility = FeasibilityReportSerializer(source='report', allow_null=True)


class SolveReportSerializer(serializers.Serializer):
    format = serializers.CharField(write_only=True)
    version = serializers.IntegerField(write_only=True)
    status = serializers.CharField()
    error = serializers.CharField(allow_null=True)
    primal_power = serializers.FloatField(allow_null=True)
    dual_bound = serializers.FloatField()
    gap = serializers.FloatField(allow_null=True)
    options = SolverOptionsSerializer()
    dual = DualResultSerializer(source='ellipsoid')
    primal = RecoverySerializer(source='recovery')

    def to_representation(self, instance):
        return {'format': REPORT_FORMAT, 'version': REPORT_VERSION, **super().to_representation(instance)}


def report_to_data(report):
    return SolveReportSerializer(report).data


def dump_report(report):
    return render_json(report_to_data(report))


def load_report(raw):
    """Parsed solver report, keyed as in the file, after checking it against the report schema."""
    data = parse_json(raw)
    check_header(data, REPORT_FORMAT, {REPORT_VERSION})
    validated(SolveReportSerializer, data)
    return data
