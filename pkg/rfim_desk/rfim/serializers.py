import dataclasses
import math

import numpy as np
from rest_framework import serializers

from .exceptions import InputError, RfimError
from .graphs import GENERATORS, Graph, build_graph
from .models import (CONVENTIONS, FIELD_KINDS, PLUS_MINUS, FieldDistribution, IsingModel, SpinConfiguration,
                     make_model, sample_field)
from .sampler import SamplerConfig


def flatten_errors(errors, path=''):
    """DRF error detail as 'path: message' lines, e.g. 'graph.edges.2: ...'."""
    if isinstance(errors, dict):
        out = []
        for key, value in errors.items():
            out.extend(flatten_errors(value, f"{path}.{key}" if path else str(key)))
        return out
    if isinstance(errors, list):
        if all(not isinstance(e, (dict, list)) for e in errors):
            return [f"{path or 'document'}: {' '.join(str(e) for e in errors)}"]
        out = []
        for i, value in enumerate(errors):
            if value:
                out.extend(flatten_errors(value, f"{path}.{i}" if path else str(i)))
        return out
    return [f"{path or 'document'}: {errors}"]


def load(serializer_class, data, what, **kwargs):
    """Validate ``data`` and build the domain object, raising InputError with the failing path."""
    serializer = serializer_class(data=data, **kwargs)
    if not serializer.is_valid():
        raise InputError(f"Invalid {what}: " + "; ".join(flatten_errors(serializer.errors)))
    return serializer.save()


class GraphSerializer(serializers.Serializer):
    n = serializers.IntegerField(min_value=0, required=False)
    edges = serializers.ListField(
        child=serializers.ListField(child=serializers.IntegerField(min_value=0), min_length=2, max_length=2),
        required=False, default=list)
    generator = serializers.ChoiceField(choices=sorted(GENERATORS), required=False)
    params = serializers.DictField(required=False, default=dict)

    def validate(self, attrs):
        if 'generator' in attrs:
            try:
                attrs['graph'] = GENERATORS[attrs['generator']](attrs['params'])
            except KeyError as exc:
                raise serializers.ValidationError({"params": f"Missing generator parameter {exc}."})
            except (RfimError, TypeError) as exc:
                raise serializers.ValidationError({"params": str(exc)})
            return attrs
        if 'n' not in attrs:
            raise serializers.ValidationError({"n": "Give either n and edges or a generator."})
        try:
            attrs['graph'] = build_graph(attrs['n'], [tuple(e) for e in attrs['edges']])
        except InputError as exc:
            raise serializers.ValidationError({"edges": str(exc)})
        return attrs

    def create(self, validated_data):
        return validated_data['graph']

    def to_representation(self, instance):
        if isinstance(instance, Graph):
            return {"n": instance.num_vertices, "edges": [list(e) for e in instance.edges]}
        return super().to_representation(instance)


class FieldDistributionSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=FIELD_KINDS)
    sigma = serializers.FloatField(required=False)
    M = serializers.FloatField(required=False)
    a = serializers.FloatField(required=False)
    base = serializers.DictField(required=False)
    offsets = serializers.ListField(child=serializers.FloatField(), required=False)

    def validate_base(self, value):
        inner = FieldDistributionSerializer(data=value)
        if not inner.is_valid():
            raise serializers.ValidationError(flatten_errors(inner.errors))
        return inner.save()

    def validate(self, attrs):
        try:
            attrs['distribution'] = FieldDistribution(
                attrs['kind'], sigma=attrs.get('sigma'), M=attrs.get('M'), a=attrs.get('a'),
                base=attrs.get('base'), offsets=tuple(attrs['offsets']) if 'offsets' in attrs else None)
        except InputError as exc:
            raise serializers.ValidationError({"kind": str(exc)})
        return attrs

    def create(self, validated_data):
        return validated_data['distribution']

    def to_representation(self, instance):
        if not isinstance(instance, FieldDistribution):
            return super().to_representation(instance)
        data = {"kind": instance.kind}
        for name in ('sigma', 'M', 'a'):
            if getattr(instance, name) is not None:
                data[name] = getattr(instance, name)
        if instance.base is not None:
            data['base'] = FieldDistributionSerializer(instance.base).data
            data['offsets'] = list(instance.offsets)
        return data


class IsingModelSerializer(serializers.Serializer):
    graph = GraphSerializer()
    beta = serializers.FloatField(required=False, allow_null=True)
    edge_couplings = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True)
    field = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True)
    field_distribution = FieldDistributionSerializer(required=False)
    field_seed = serializers.IntegerField(min_value=0, required=False, default=0)
    convention = serializers.ChoiceField(choices=CONVENTIONS, default=PLUS_MINUS)
    pinning = serializers.DictField(child=serializers.IntegerField(), required=False, default=dict)
    beta_max = serializers.FloatField(required=False, allow_null=True)

    def validate_pinning(self, value):
        try:
            return {int(v): s for v, s in value.items()}
        except ValueError:
            raise serializers.ValidationError("Pinning keys must be vertex indices.")

    def validate(self, attrs):
        if attrs.get('beta') is None and attrs.get('edge_couplings') is None:
            raise serializers.ValidationError({"beta": "Give either beta or edge_couplings."})
        if attrs.get('field') is not None and attrs.get('field_distribution') is not None:
            raise serializers.ValidationError({"field": "Give either field values or a field_distribution."})
        graph = attrs['graph']['graph']
        field_values = attrs.get('field')
        if attrs.get('field_distribution') is not None:
            distribution = attrs['field_distribution']['distribution']
            try:
                field_values = sample_field(distribution, graph.num_vertices, attrs['field_seed']).values
            except InputError as exc:
                raise serializers.ValidationError({"field_distribution": str(exc)})
        try:
            attrs['model'] = make_model(graph, attrs.get('beta'), field_values, attrs['convention'],
                                        attrs['pinning'], attrs.get('edge_couplings'), attrs.get('beta_max'))
        except InputError as exc:
            raise serializers.ValidationError(str(exc))
        return attrs

    def create(self, validated_data):
        return validated_data['model']

    def to_representation(self, instance):
        if not isinstance(instance, IsingModel):
            return super().to_representation(instance)
        data = {
            "graph": GraphSerializer(instance.graph).data,
            "convention": instance.convention,
            "field": [float(x) for x in instance.field],
            "pinning": {str(v): int(s) for v, s in sorted(instance.pinning.items())},
        }
        uniform = instance.uniform_coupling
        if uniform is not None or not len(instance.couplings):
            data["beta"] = uniform if uniform is not None else 0.0
        else:
            data["edge_couplings"] = [float(x) for x in instance.couplings]
        if instance.beta_max is not None:
            data["beta_max"] = instance.beta_max
        return data


class SpinConfigurationSerializer(serializers.BaseSerializer):
    def to_representation(self, instance):
        return {"convention": instance.convention, "spins": [int(s) for s in instance.values()]}

    def to_internal_value(self, data):
        try:
            return SpinConfiguration.from_values(data['spins'], data.get('convention', PLUS_MINUS))
        except (KeyError, TypeError):
            raise serializers.ValidationError({"spins": "Expected a list of spins."})
        except InputError as exc:
            raise serializers.ValidationError({"spins": str(exc)})

    def create(self, validated_data):
        return validated_data


class SamplerConfigSerializer(serializers.Serializer):
    c_star = serializers.FloatField()
    seed = serializers.IntegerField(min_value=0, default=0)
    ordering_seed = serializers.IntegerField(min_value=0, required=False, allow_null=True)
    per_component = serializers.BooleanField(default=False)
    prefix_k = serializers.BooleanField(default=False)
    validate_output = serializers.BooleanField(default=False, source='validate')
    eps = serializers.FloatField(default=0.05)
    replicas = serializers.IntegerField(min_value=1, default=10_000)

    def validate(self, attrs):
        try:
            attrs['config'] = SamplerConfig(**attrs)
        except InputError as exc:
            raise serializers.ValidationError(str(exc))
        return attrs

    def create(self, validated_data):
        return validated_data['config']


STEP_KINDS = ('gap_vs_exact', 'mlsi_vs_probe', 'posterior_identity', 'incremental_sample', 'wsm',
              'row_sum_tails', 'certificate')


class ExperimentStepSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=STEP_KINDS)
    name = serializers.CharField(required=False)
    params = serializers.DictField(required=False, default=dict)


class ExperimentSerializer(serializers.Serializer):
    name = serializers.CharField(default='experiment')
    seed = serializers.IntegerField(min_value=0, default=0)
    workers = serializers.IntegerField(min_value=1, required=False)
    steps = ExperimentStepSerializer(many=True, required=False, default=list)

    def validate_steps(self, value):
        names = set()
        for i, step in enumerate(value):
            step.setdefault('name', f"{i:02d}_{step['kind']}")
            if step['name'] in names:
                raise serializers.ValidationError(f"Duplicate step name {step['name']!r}.")
            names.add(step['name'])
        return value

    def create(self, validated_data):
        return validated_data


def jsonable(obj):
    """Plain JSON data for reports: dataclasses, numpy values, models and graphs."""
    if isinstance(obj, IsingModel):
        return IsingModelSerializer(obj).data
    if isinstance(obj, Graph):
        return GraphSerializer(obj).data
    if isinstance(obj, FieldDistribution):
        return FieldDistributionSerializer(obj).data
    if isinstance(obj, SpinConfiguration):
        return SpinConfigurationSerializer(obj).data
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return 'nan' if math.isnan(obj) else ('inf' if obj > 0 else '-inf')
    return obj


class ReportSerializer(serializers.BaseSerializer):
    def to_representation(self, instance):
        return jsonable(instance)


class GibbsTableSerializer(serializers.BaseSerializer):
    def to_representation(self, instance):
        return {
            "n": instance.model.n,
            "convention": instance.model.convention,
            "free": list(instance.free),
            "log_partition": instance.log_partition,
            "probs": [float(p) for p in instance.probs],
        }


# Experiment step parameters

class StepParamsSerializer(serializers.Serializer):
    def create(self, validated_data):
        return validated_data


class RandomModelsSerializer(StepParamsSerializer):
    models = serializers.IntegerField(min_value=1, default=20)
    n = serializers.IntegerField(min_value=2, default=8)
    degree = serializers.IntegerField(min_value=3, default=3)
    beta = serializers.FloatField(min_value=0)
    p0 = serializers.FloatField()
    K = serializers.FloatField()


class GapVsExactSerializer(RandomModelsSerializer):
    field = FieldDistributionSerializer()


class MlsiVsProbeSerializer(RandomModelsSerializer):
    models = serializers.IntegerField(min_value=1, default=5)
    n = serializers.IntegerField(min_value=2, default=6)
    M = serializers.FloatField()
    restarts = serializers.IntegerField(min_value=1, default=20)

    def validate_M(self, value):
        # fields are drawn from uniform_symmetric(M)
        if not value > 0:
            raise serializers.ValidationError("M must be positive.")
        return value


class PosteriorIdentitySerializer(StepParamsSerializer):
    graph = GraphSerializer()
    beta = serializers.FloatField(min_value=0)
    field = FieldDistributionSerializer()
    field_seed = serializers.IntegerField(min_value=0, default=0)
    t_fractions = serializers.ListField(child=serializers.FloatField(min_value=0, max_value=1),
                                        default=lambda: [0.0, 0.25, 0.5, 0.75])


class IncrementalSampleSerializer(StepParamsSerializer):
    model = IsingModelSerializer()
    sampler = SamplerConfigSerializer()


class WsmSerializer(StepParamsSerializer):
    graph = GraphSerializer()
    beta = serializers.FloatField(min_value=0)
    field = FieldDistributionSerializer()
    radii = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=1)
    field_trials = serializers.IntegerField(min_value=1, default=100)
    vertices = serializers.ListField(child=serializers.IntegerField(min_value=0), required=False)
    t = serializers.FloatField(min_value=0, default=0.0)
    sl_draws = serializers.IntegerField(min_value=1, default=1)


class RowSumTailsSerializer(StepParamsSerializer):
    graph = GraphSerializer()
    beta = serializers.FloatField(min_value=0)
    field = FieldDistributionSerializer()
    K = serializers.FloatField()
    p0 = serializers.FloatField()
    trials = serializers.IntegerField(min_value=1, default=1000)
    m_grid = serializers.ListField(child=serializers.FloatField(min_value=0), min_length=1)
    mode = serializers.ChoiceField(choices=('auto', 'exact', 'sampled'), default='auto')


class CertificateParamsSerializer(StepParamsSerializer):
    kind = serializers.ChoiceField(choices=('gap', 'mlsi', 'norm', 'refined'))
    n = serializers.IntegerField(min_value=1)
    beta = serializers.FloatField()
    delta = serializers.IntegerField(min_value=1)
    alpha_star = serializers.FloatField(required=False)
    p0 = serializers.FloatField(required=False)
    M = serializers.FloatField(min_value=0, required=False)
    L = serializers.FloatField(required=False)

    def validate(self, attrs):
        if 'alpha_star' not in attrs and 'p0' not in attrs:
            raise serializers.ValidationError({"alpha_star": "Give alpha_star or p0."})
        if attrs['kind'] == 'mlsi' and 'M' not in attrs:
            raise serializers.ValidationError({"M": "The MLSI certificate needs the field bound M."})
        if attrs['kind'] == 'refined' and 'L' not in attrs:
            raise serializers.ValidationError({"L": "The refined tail needs L."})
        if attrs['kind'] == 'norm' and 'p0' not in attrs:
            raise serializers.ValidationError({"p0": "The operator-norm bound needs p0."})
        return attrs


STEP_PARAMS = {
    'gap_vs_exact': GapVsExactSerializer,
    'mlsi_vs_probe': MlsiVsProbeSerializer,
    'posterior_identity': PosteriorIdentitySerializer,
    'incremental_sample': IncrementalSampleSerializer,
    'wsm': WsmSerializer,
    'row_sum_tails': RowSumTailsSerializer,
    'certificate': CertificateParamsSerializer,
}
