# serializers.py
from rest_framework import serializers

from core_model.serializers import AllocationSerializer, FeasibilityReportSerializer, SkeletonSerializer
from dual_solver.serializers import SolveReportSerializer
from utils.serialization import check_header, parse_json, render_json, validated

CHECK_FORMAT = 'cran-oracle-check'
CHECK_VERSION = 1


class OracleResultSerializer(serializers.Serializer):
    status = serializers.CharField()
    cause = serializers.CharField(allow_null=True)
    total_power = serializers.FloatField(allow_null=True)
    kkt_residual = serializers.FloatField(allow_null=True)
    skeletons_total = serializers.IntegerField()
    evaluated = serializers.IntegerField()
    pruned = serializers.IntegerField()
    skeleton = SkeletonSerializer(allow_null=True)
    allocation = AllocationSerializer(allow_null=True)
    feasibility = FeasibilityReportSerializer(source='report', allow_null=True)


class OracleCheckSerializer(serializers.Serializer):
    format = serializers.CharField(write_only=True)
    version = serializers.IntegerField(write_only=True)
    primal_gap = serializers.FloatField(allow_null=True)
    dual_gap = serializers.FloatField(allow_null=True)
    weak_duality = serializers.SerializerMethodField()
    oracle = OracleResultSerializer()
    solver = SolveReportSerializer(source='solve')

    def get_weak_duality(self, obj):
        return obj.weak_duality_holds()

    def to_representation(self, instance):
        return {'format': CHECK_FORMAT, 'version': CHECK_VERSION, **super().to_representation(instance)}


def dump_check(check):
    return render_json(OracleCheckSerializer(check).data)


def load_check(raw):
    data = parse_json(raw)
    check_header(data, CHECK_FORMAT, {CHECK_VERSION})
    validated(OracleCheckSerializer, data)
    return data
