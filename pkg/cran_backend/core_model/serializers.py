from rest_framework import serializers

from utils.serialization import FloatListField, IntListField, MatrixField


class AllocationSerializer(serializers.Serializer):
    user_assignment = MatrixField(child=IntListField())
    rrh_selection = MatrixField(child=IntListField())
    power = MatrixField()
    fronthaul_share = MatrixField()


class ViolationSerializer(serializers.Serializer):
    kind = serializers.CharField()
    index = serializers.IntegerField()
    slack = serializers.FloatField()


class FeasibilityReportSerializer(serializers.Serializer):
    """Constraint check of an allocation: delivered rates, fronthaul loads (bits/s) and violations."""
    is_feasible = serializers.BooleanField(read_only=True)
    total_power = serializers.FloatField()
    user_rates = FloatListField()
    fronthaul_loads = FloatListField()
    violations = ViolationSerializer(many=True)


class SkeletonSerializer(serializers.Serializer):
    users = IntListField()
    masks = IntListField()
