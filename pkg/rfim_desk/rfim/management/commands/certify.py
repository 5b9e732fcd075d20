from rfim.certificates import gap_certificate, mlsi_certificate, operator_norm_bound, refined_gap_tail
from rfim.exceptions import InputError
from rfim.files import read_graph, read_json
from rfim.models import PLUS_MINUS, ZERO_ONE, to_plus_minus, to_zero_one, xi_star
from rfim.oracle import cor2_matrix, gibbs_table, glauber_gap
from rfim.percolation import (BFS, EXPLORE, cluster_of_edge, cluster_tail_bound, compare_progeny,
                              disagreement_experiment, exact_tail, norm_interpolation_check, percolate,
                              row_sum_tail_report, simulate_total_progeny)

from ._base import RfimCommand, parse_edge, parse_floats, parse_pairs


class Command(RfimCommand):
    help = ("Percolation-based certificates and their checks: gap, mlsi, tails, norm, percolate, "
            "refined, progeny, disagree, rowsum.")
    actions = ('gap', 'mlsi', 'tails', 'norm', 'percolate', 'refined', 'progeny', 'disagree', 'rowsum')

    def _certificate_arguments(self, parser):
        parser.add_argument('--n', type=int, required=True)
        parser.add_argument('--beta', type=float, required=True)
        parser.add_argument('--delta', type=int, required=True)
        parser.add_argument('--alpha-star', type=float)
        parser.add_argument('--p0', type=float, help="Derive alpha* = xi*(p0) / 2 instead of passing it.")

    def _alpha(self, options):
        if options['alpha_star'] is not None:
            return options['alpha_star']
        if options['p0'] is None:
            raise InputError("Pass --alpha-star or --p0.")
        return xi_star(options['p0'], options['delta']) / 2.0

    def add_gap_arguments(self, parser):
        self._certificate_arguments(parser)
        parser.add_argument('--eps', type=float, default=0.25)
        parser.add_argument('--field-l1', type=float, help="||h||_1 for the mixing-time bound.")
        self.model_argument(parser, required=False)

    def handle_gap(self, n, beta, delta, eps, field_l1, out, **options):
        cert = gap_certificate(n, beta, delta, self._alpha(options))
        report = {"certificate": cert}
        if field_l1 is not None:
            report["tmix_upper"] = cert.tmix_upper(eps, field_l1)
        if options['model']:
            exact = glauber_gap(self.load_model(options)).gap
            report.update(exact_gap=exact, certificate_holds=cert.gap_lower <= exact)
        self.emit(report, out)

    def add_mlsi_arguments(self, parser):
        self._certificate_arguments(parser)
        parser.add_argument('--M', type=float, required=True, help="Bound on |h|.")

    def handle_mlsi(self, n, beta, delta, M, out, **options):
        self.emit(mlsi_certificate(n, beta, delta, self._alpha(options), M), out)

    def add_tails_arguments(self, parser):
        parser.add_argument('--delta', type=int, required=True)
        parser.add_argument('--p0', type=float, required=True)
        parser.add_argument('--m', default='2,5,10,20,50', help="Comma-separated cluster sizes.")

    def handle_tails(self, delta, p0, m, out, **options):
        rows = []
        for size in parse_floats(m):
            bound = cluster_tail_bound(delta, p0, size)
            exact = exact_tail(delta, p0, int(size))
            rows.append({"m": size, "exact": exact, "bound": bound.bound, "ok": exact <= bound.bound})
        self.emit({"delta": delta, "p0": p0, "rows": rows, "passed": all(r["ok"] for r in rows)}, out)

    def add_norm_arguments(self, parser):
        parser.add_argument('--matrix', help="JSON file holding a square matrix.")
        self.model_argument(parser, required=False)
        parser.add_argument('--method', choices=('joint', 'condition'), default='joint')
        parser.add_argument('--n', type=int, help="With --alpha-star and --delta, also report the operator norm bound.")
        parser.add_argument('--delta', type=int)
        parser.add_argument('--alpha-star', type=float)
        parser.add_argument('--p0', type=float)

    def handle_norm(self, matrix, method, n, delta, alpha_star, p0, out, **options):
        if matrix:
            values = read_json(matrix)
        elif options['model']:
            model = self.load_model(options)
            values = cor2_matrix(gibbs_table(model if model.convention == ZERO_ONE else to_zero_one(model)), method)
        else:
            raise InputError("Pass --matrix or --model.")
        report = {"check": norm_interpolation_check(values)}
        if None not in (n, delta, alpha_star, p0):
            report["bound"] = operator_norm_bound(n, delta, alpha_star, p0)
        self.emit(report, out)

    def add_percolate_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--K', type=float, required=True)
        parser.add_argument('--p0', type=float, required=True)
        parser.add_argument('--edge', help="Also report the forced-open cluster of this u-v edge.")

    def handle_percolate(self, K, p0, edge, seed, out, **options):
        model = self._plus_minus(options)
        realization = percolate(model.graph, model.field, K, p0, seed)
        report = {
            "open": realization.open_set,
            "open_fraction": realization.open_fraction,
            "provenance": realization.provenance,
        }
        if edge:
            e = parse_edge(edge)
            report["cluster"] = cluster_of_edge(realization, e)
        self.emit(report, out)

    def add_refined_arguments(self, parser):
        self._certificate_arguments(parser)
        parser.add_argument('--L', type=float, required=True)

    def handle_refined(self, n, beta, delta, L, p0, out, **options):
        self.emit(refined_gap_tail(n, beta, delta, self._alpha(options), L, p0), out)

    def add_progeny_arguments(self, parser):
        parser.add_argument('--delta', type=int, default=3)
        parser.add_argument('--p0', type=float, default=0.1)
        parser.add_argument('--forests', type=int, default=100_000)
        parser.add_argument('--max-x', type=int, default=30)

    def handle_progeny(self, delta, p0, forests, max_x, seed, out, **options):
        totals = simulate_total_progeny(delta, p0, forests, seed)
        comparison = compare_progeny(totals, delta, p0, max_x)
        self.emit({"comparison": comparison, "passed": comparison.exceed_3sigma == 0}, out)

    def add_disagree_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--edge', required=True, help="u-v")
        parser.add_argument('--theta', type=float, required=True)
        parser.add_argument('--K', type=float, required=True)
        parser.add_argument('--p0', type=float, required=True)
        parser.add_argument('--pin', default='', help="Extra 0/1 pinning as vertex:value pairs.")
        parser.add_argument('--order', choices=(EXPLORE, BFS), default=EXPLORE)

    def handle_disagree(self, edge, theta, K, p0, pin, order, seed, out, **options):
        model = self._plus_minus(options)
        e = parse_edge(edge)
        result = disagreement_experiment(to_zero_one(model), e, theta, parse_pairs(pin), model.field, K, p0, seed,
                                         order)
        self.emit(result, out)

    def add_rowsum_arguments(self, parser):
        parser.add_argument('--graph', required=True)
        parser.add_argument('--beta', type=float, required=True)
        self.field_argument(parser)
        parser.add_argument('--K', type=float, required=True)
        parser.add_argument('--p0', type=float, required=True)
        parser.add_argument('--trials', type=int, default=1000)
        parser.add_argument('--m', default='1,2,3,4,5')
        parser.add_argument('--thetas', help="Comma-separated tilt grid.")
        parser.add_argument('--mode', choices=('auto', 'exact', 'sampled'), default='auto')
        parser.add_argument('--workers', type=int)

    def handle_rowsum(self, graph, beta, K, p0, trials, m, thetas, mode, workers, seed, out, **options):
        report = row_sum_tail_report(read_graph(graph), beta, self.load_field(options), K, p0, trials, seed,
                                     parse_floats(m), parse_floats(thetas) if thetas else None, mode, workers)
        self.emit({"report": report, "passed": all(r.row_ok and r.column_ok for r in report.rows)}, out)

    def _plus_minus(self, options):
        model = self.load_model(options)
        return model if model.convention == PLUS_MINUS else to_plus_minus(model)
