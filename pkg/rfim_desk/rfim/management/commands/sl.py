from pathlib import Path

from rfim.boosting import martingale_check, sl_boost, trace_moment_probe, weak_poincare_frequency, weak_poincare_probe
from rfim.exceptions import InputError
from rfim.files import read_graph, write_model, write_wsm
from rfim.models import PLUS_MINUS, to_plus_minus
from rfim.spatial_mixing import (DEFAULT_C_GRID, build_separation_plan, decay_confidence, estimate_wsm,
                                 factorized_bound, fkg_correlation_check)

from ._base import RfimCommand, parse_floats, parse_ints


class Command(RfimCommand):
    help = "Field boosting and spatial mixing: boost, wsm, plan, probe, martingale, poincare, fkg."
    actions = ('boost', 'wsm', 'plan', 'probe', 'martingale', 'poincare', 'fkg')

    def add_boost_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--t', type=float, required=True)
        parser.add_argument('--sampler', choices=('oracle', 'glauber'), default='oracle')
        parser.add_argument('--burn-in', type=int)
        parser.add_argument('--boosted', help="Also write the boosted model JSON here.")

    def handle_boost(self, t, sampler, burn_in, boosted, seed, out, **options):
        realization = sl_boost(self._plus_minus(options), t, sampler, seed, burn_in)
        if boosted:
            write_model(realization.boosted_model, boosted)
        self.emit({
            "t": realization.t,
            "sigma_star": realization.sigma_star,
            "noise": realization.noise,
            "y": realization.y,
            "boosted_field": realization.boosted_model.field,
        }, out)

    def add_wsm_arguments(self, parser):
        parser.add_argument('--graph', required=True)
        parser.add_argument('--beta', type=float, required=True)
        self.field_argument(parser)
        parser.add_argument('--radii', default='1,2,3,4')
        parser.add_argument('--trials', type=int, default=100)
        parser.add_argument('--vertices', help="Comma-separated vertices; all by default.")
        parser.add_argument('--t', type=float, default=0.0, help="Estimate on boosted measures at this SL time.")
        parser.add_argument('--sl-draws', type=int, default=1)
        parser.add_argument('--c-grid', help="Comma-separated C values for the satisfied grid.")
        parser.add_argument('--csv', help="Write (vertex, radius, mean_delta, stderr) rows here.")
        parser.add_argument('--workers', type=int)

    def handle_wsm(self, graph, beta, radii, trials, vertices, t, sl_draws, c_grid, csv, workers, seed, out,
                   **options):
        radii = parse_ints(radii)
        report = estimate_wsm(read_graph(graph), beta, self.load_field(options), radii, trials, seed,
                              parse_ints(vertices) if vertices else None, t, sl_draws,
                              parse_floats(c_grid) if c_grid else DEFAULT_C_GRID, workers)
        if csv:
            write_wsm(report, csv)
        elif out:
            write_wsm(report, Path(out).with_suffix('.csv'))
        summary = {
            "radii": report.radii,
            "sup_mean": report.sup_mean,
            "fitted_C": report.fitted_C,
            "satisfied": report.satisfied,
            "sources": report.sources,
            "label": "fitted",
        }
        if len(radii) > 1 and trials > 1:
            summary["decay_z"] = decay_confidence(report, min(radii), max(radii))
        self.emit(summary, out)

    def add_plan_arguments(self, parser):
        parser.add_argument('--graph', required=True)
        parser.add_argument('--points', required=True, help="Comma-separated vertex sequence.")
        self.model_argument(parser, required=False)

    def handle_plan(self, graph, points, out, **options):
        plan = build_separation_plan(read_graph(graph), parse_ints(points))
        report = {"plan": plan}
        if options['model']:
            report["factorized_bound"] = factorized_bound(self.load_model(options), plan)
        self.emit(report, out)

    def add_probe_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--p', type=int, default=2)
        parser.add_argument('--t', default='0,1,5', help="Comma-separated SL times.")
        parser.add_argument('--realizations', type=int, default=1000)

    def handle_probe(self, p, t, realizations, seed, out, **options):
        self.emit(trace_moment_probe(self._plus_minus(options), p, parse_floats(t), realizations, seed), out)

    def add_martingale_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--t', type=float, required=True)
        parser.add_argument('--realizations', type=int, default=10_000)

    def handle_martingale(self, t, realizations, seed, out, **options):
        report = martingale_check(self._plus_minus(options), t, realizations, seed)
        self.emit({"report": report, "passed": report.max_z <= 3.0}, out)

    def add_poincare_arguments(self, parser):
        parser.add_argument('--T', type=float, required=True)
        parser.add_argument('--delta', type=float, default=0.5)
        parser.add_argument('--functions', default='constant,magnetization')
        parser.add_argument('--realizations', type=int, default=500)
        self.model_argument(parser, required=False)
        parser.add_argument('--graph', help="With --beta and --field, report satisfaction over quenched fields.")
        parser.add_argument('--beta', type=float)
        parser.add_argument('--field')
        parser.add_argument('--trials', type=int, default=100)
        parser.add_argument('--workers', type=int)

    def handle_poincare(self, T, delta, functions, realizations, graph, beta, trials, workers, seed, out, **options):
        names = [f for f in functions.split(',') if f]
        if options['model']:
            report = weak_poincare_probe(self._plus_minus(options), T, delta, names, realizations, seed)
        else:
            if graph is None or beta is None or options['field'] is None:
                raise InputError("Pass --model, or --graph with --beta and --field.")
            report = weak_poincare_frequency(read_graph(graph), beta, self.load_field(options), T, delta, names,
                                             trials, realizations, seed, workers)
        self.emit(report, out)

    def add_fkg_arguments(self, parser):
        self.model_argument(parser)

    def handle_fkg(self, out, **options):
        report = fkg_correlation_check(self.load_model(options))
        self.emit({"report": report, "passed": report.passed}, out)

    def _plus_minus(self, options):
        model = self.load_model(options)
        return model if model.convention == PLUS_MINUS else to_plus_minus(model)
