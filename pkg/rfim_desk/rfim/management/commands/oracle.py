from rfim.files import write_table
from rfim.localization import default_t_grid
from rfim.models import ZERO_ONE, to_zero_one
from rfim.oracle import (cor2_matrix, fkg_monotonicity_check, gibbs_table, high_temperature_tensorization_bound,
                         mean_and_covariance, spectral_report, sup_cor2_over_pinnings)
from rfim.serializers import GibbsTableSerializer

from ._base import RfimCommand, parse_floats


class Command(RfimCommand):
    help = "Exact enumeration on small models: table, gap, cor2, sweep, fkg."
    actions = ('table', 'gap', 'cor2', 'sweep', 'fkg')

    def add_table_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--binary', help="Also write the table in the binary format here.")
        parser.add_argument('--moments', action='store_true', help="Include means and covariances.")

    def handle_table(self, binary, moments, out, **options):
        table = gibbs_table(self.load_model(options))
        data = dict(GibbsTableSerializer(table).data)
        if moments:
            mean, cov = mean_and_covariance(table)
            data.update(mean=mean, covariance=cov)
        if binary:
            write_table(table, binary)
        self.emit(data, out)

    def add_gap_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--mlsi-restarts', type=int, default=0)

    def handle_gap(self, mlsi_restarts, seed, out, **options):
        model = self.load_model(options)
        report = {"spectral": spectral_report(model, mlsi_restarts, seed)}
        if model.convention == ZERO_ONE:
            report["high_temperature_bound"] = high_temperature_tensorization_bound(model)
        self.emit(report, out)

    def add_cor2_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--method', choices=('joint', 'condition'), default='joint')

    def handle_cor2(self, method, out, **options):
        model = self._zero_one(options)
        table = gibbs_table(model)
        self.emit({"edges": list(model.graph.edges), "matrix": cor2_matrix(table, method)}, out)

    def add_sweep_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--thetas', help="Comma-separated theta grid; default 0, theta*/4, ..., theta*.")
        parser.add_argument('--beta', type=float, help="beta for the default grid (pm coupling).")
        parser.add_argument('--workers', type=int)

    def handle_sweep(self, thetas, beta, workers, out, **options):
        model = self._zero_one(options)
        if thetas:
            grid = parse_floats(thetas)
        else:
            grid = [t for t in default_t_grid(beta if beta is not None else model.coupling_bound() / 4.0) if t < 1]
        self.emit(sup_cor2_over_pinnings(model, grid, workers), out)

    def add_fkg_arguments(self, parser):
        self.model_argument(parser)

    def handle_fkg(self, out, **options):
        self.emit(fkg_monotonicity_check(self.load_model(options)), out)

    def _zero_one(self, options):
        model = self.load_model(options)
        return model if model.convention == ZERO_ONE else to_zero_one(model)
