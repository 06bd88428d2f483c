from rest_framework import serializers

from .cauchy import BoundaryPolicy, Scheme


class WindowField(serializers.Field):
    """An x-interval written as ``lo,hi`` or given as a two-item list."""

    default_error_messages = {
        'invalid': 'Window must be two numbers "lo,hi".',
        'order': 'Window must satisfy lo < hi.',
    }

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = data.strip().strip('()[]').split(',')
        try:
            lo, hi = (float(item) for item in data)
        except (TypeError, ValueError):
            self.fail('invalid')
        if not lo < hi:
            self.fail('order')
        return (lo, hi)

    def to_representation(self, value):
        return [value[0], value[1]]


class ExperimentConfigSerializer(serializers.Serializer):
    id = serializers.CharField(max_length=64, required=False)
    scheme = serializers.ChoiceField(choices=[s.value for s in Scheme], required=False)
    dx = serializers.FloatField(required=False)
    cfl = serializers.FloatField(required=False)
    T = serializers.FloatField(required=False)
    x_min = serializers.FloatField(required=False)
    x_max = serializers.FloatField(required=False)
    c = serializers.FloatField(required=False)
    eps = serializers.FloatField(required=False)
    tol = serializers.FloatField(required=False)
    window = WindowField(required=False)
    snapshot_stride = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    boundary = serializers.ChoiceField(choices=[b.value for b in BoundaryPolicy], required=False)
    x0 = serializers.FloatField(required=False)

    def _positive(self, name, value):
        if not value > 0:
            raise serializers.ValidationError(f'{name} must be positive.')
        return value

    def validate_dx(self, value):
        return self._positive('dx', value)

    def validate_T(self, value):
        return self._positive('T', value)

    def validate_eps(self, value):
        return self._positive('eps', value)

    def validate_tol(self, value):
        return self._positive('tol', value)

    def validate_cfl(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError('cfl must lie in (0, 1].')
        return value

    def validate(self, attrs):
        x_min, x_max = attrs.get('x_min'), attrs.get('x_max')
        if x_min is not None and x_max is not None and not x_min < x_max:
            raise serializers.ValidationError({'x_max': 'x_max must be greater than x_min.'})
        window = attrs.get('window')
        if window is not None and x_min is not None and x_max is not None:
            if window[0] < x_min or window[1] > x_max:
                raise serializers.ValidationError({'window': 'Window must lie inside [x_min, x_max].'})
        return attrs


class RunRequestSerializer(serializers.Serializer):
    overrides = serializers.DictField(required=False, default=dict)

    def validate_overrides(self, value):
        config = ExperimentConfigSerializer(data=value)
        unknown = sorted(set(value) - set(config.fields))
        if unknown:
            raise serializers.ValidationError(f'Unknown config keys: {", ".join(unknown)}.')
        if not config.is_valid():
            raise serializers.ValidationError(config.errors)
        return value
