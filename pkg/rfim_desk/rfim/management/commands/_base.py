"""Shared plumbing for the rfim management commands."""
import json
import logging

from django.core.management.base import BaseCommand, CommandError

from rfim.conf import rfim_setting
from rfim.exceptions import InputError, RfimError
from rfim.files import dumps, read_json, read_model, write_json
from rfim.serializers import FieldDistributionSerializer, load

logger = logging.getLogger(__name__)


def parse_pairs(text):
    """'3:1,5:-1' -> {3: 1, 5: -1}."""
    out = {}
    if not text:
        return out
    for item in text.split(','):
        v, _, s = item.partition(':')
        try:
            out[int(v)] = int(s)
        except ValueError:
            raise InputError(f"Bad pinning entry {item!r}; expected vertex:value.") from None
    return out


def parse_edges(text):
    """'0-1,1-2' -> [(0, 1), (1, 2)]."""
    edges = []
    for item in filter(None, (text or '').split(',')):
        u, _, v = item.partition('-')
        try:
            edges.append((int(u), int(v)))
        except ValueError:
            raise InputError(f"Bad edge {item!r}; expected u-v.") from None
    return edges


def parse_edge(text):
    edges = parse_edges(text)
    if len(edges) != 1:
        raise InputError(f"Expected a single u-v edge, got {text!r}.")
    return edges[0]


def parse_floats(text):
    try:
        return [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise InputError(f"Expected a comma-separated list of numbers, got {text!r}.") from None


def parse_ints(text):
    try:
        return [int(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise InputError(f"Expected a comma-separated list of integers, got {text!r}.") from None


class RfimCommand(BaseCommand):
    """
    A command group with sub-actions. Subclasses list ``actions`` and define
    ``add_<action>_arguments(parser)`` and ``handle_<action>(**options)``.
    """
    actions = ()

    def add_arguments(self, parser):
        sub = parser.add_subparsers(dest='action', required=True)
        for action in self.actions:
            p = sub.add_parser(action)
            p.add_argument('--out', help="Write the JSON result here instead of stdout.")
            p.add_argument('--seed', type=int, default=rfim_setting('DEFAULT_SEED'))
            getattr(self, f"add_{action}_arguments")(p)

    def handle(self, *args, **options):
        action = options['action']
        try:
            return getattr(self, f"handle_{action}")(**options)
        except RfimError as exc:
            logger.error("%s %s failed: %s", self.__module__.rsplit('.', 1)[-1], action, exc)
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

    def emit(self, data, out=None):
        if out:
            path = write_json(data, out)
            self.stdout.write(self.style.SUCCESS(f"Wrote {path}"))
        else:
            self.stdout.write(dumps(data), ending='')

    def model_argument(self, parser, required=True):
        parser.add_argument('--model', required=required, help="Model JSON file.")

    def load_model(self, options):
        return read_model(options['model'])

    def field_argument(self, parser):
        parser.add_argument('--field', required=True,
                            help="Field distribution, JSON text or a path, e.g. '{\"kind\": \"two_point\", \"a\": 5}'.")

    def load_field(self, options):
        text = options['field']
        data = read_json(text) if text.endswith('.json') else _json_text(text)
        return load(FieldDistributionSerializer, data, "field distribution")


def _json_text(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"Field distribution is not valid JSON: {exc}") from None
