from rfim.files import read_graph, write_model
from rfim.models import (ZERO_ONE, assumption_params, check_field_assumption, edge_tilt, make_model, sample_field,
                         theta_star, to_plus_minus, to_zero_one)

from ._base import RfimCommand, parse_floats, parse_pairs


class Command(RfimCommand):
    help = "Build models, convert and tilt them, and check the large-disorder assumption: make, convert, tilt, assume."
    actions = ('make', 'convert', 'tilt', 'assume')

    def add_make_arguments(self, parser):
        parser.add_argument('--graph', required=True)
        parser.add_argument('--beta', type=float, required=True)
        parser.add_argument('--field', help="Field distribution JSON; zero field when omitted.")
        parser.add_argument('--field-values', help="Comma-separated per-vertex field.")
        parser.add_argument('--pin', default='', help="Pinning as vertex:value pairs, e.g. 0:1,3:-1.")
        parser.add_argument('--zero-one', action='store_true', help="Emit the model in 0/1 coordinates.")

    def handle_make(self, graph, beta, field_values, pin, zero_one, seed, out, **options):
        g = read_graph(graph)
        values = None
        if options['field']:
            values = sample_field(self.load_field(options), g.num_vertices, seed).values
        elif field_values:
            values = parse_floats(field_values)
        model = make_model(g, beta, values, pinning=parse_pairs(pin))
        if zero_one:
            model = to_zero_one(model)
        self._write(model, out)

    def add_convert_arguments(self, parser):
        self.model_argument(parser)

    def handle_convert(self, out, **options):
        model = self.load_model(options)
        self._write(to_plus_minus(model) if model.convention == ZERO_ONE else to_zero_one(model), out)

    def add_tilt_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--theta', type=float)
        parser.add_argument('--fraction', type=float, help="theta as a fraction of theta* for --beta.")
        parser.add_argument('--beta', type=float)
        parser.add_argument('--pin', default='')

    def handle_tilt(self, theta, fraction, beta, pin, out, **options):
        model = self.load_model(options)
        if model.convention != ZERO_ONE:
            model = to_zero_one(model)
        if theta is None:
            beta = beta if beta is not None else model.coupling_bound() / 4.0
            theta = (fraction if fraction is not None else 1.0) * theta_star(beta)
        self._write(edge_tilt(model, theta, parse_pairs(pin)), out)

    def add_assume_arguments(self, parser):
        parser.add_argument('--p0', type=float, required=True)
        parser.add_argument('--K', type=float, required=True)
        parser.add_argument('--beta', type=float, required=True)
        parser.add_argument('--delta', type=int, required=True)
        parser.add_argument('--field', help="Also check P(|h| <= K) < p0/2 for this distribution.")

    def handle_assume(self, p0, K, beta, delta, out, **options):
        result = {"params": assumption_params(p0, K, beta, delta)}
        if options['field']:
            result["field"] = check_field_assumption(self.load_field(options), p0, K)
        self.emit(result, out)

    def _write(self, model, out):
        if out:
            path = write_model(model, out)
            self.stdout.write(self.style.SUCCESS(f"Wrote {path}"))
        else:
            self.emit(model)
