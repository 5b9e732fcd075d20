from rfim.exceptions import InputError
from rfim.localization import (entropy_conservation_for_mlsi, entropy_conservation_R, posterior_identity,
                               posterior_model, sample_noising_trace, variance_conservation_at_terminal,
                               variance_conservation_R, verify_posterior_by_simulation)
from rfim.models import ZERO_ONE, to_zero_one
from rfim.oracle import gibbs_table
from rfim.serializers import GibbsTableSerializer

from ._base import RfimCommand, parse_edges


class Command(RfimCommand):
    help = "Edge-field localization: trace, posterior, verify, certificate."
    actions = ('trace', 'posterior', 'verify', 'certificate')

    def add_trace_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--sampler', choices=('oracle', 'glauber'), default='oracle')
        parser.add_argument('--burn-in', type=int)
        parser.add_argument('--t', type=float, default=0.5)

    def handle_trace(self, sampler, burn_in, t, seed, out, **options):
        trace = sample_noising_trace(self._zero_one(options), sampler, seed, burn_in)
        self.emit({
            "x_sample": trace.x_sample,
            "edge_uniforms": trace.edge_uniforms,
            "satisfied": trace.satisfied(),
            "t": t,
            "revealed": sorted(trace.revealed(t)),
        }, out)

    def add_posterior_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--t', type=float, required=True)
        parser.add_argument('--revealed', default='', help="Revealed edges as u-v pairs, e.g. 0-1,1-2.")
        parser.add_argument('--identity', action='store_true',
                            help="Compare the posterior against exact Bayes enumeration over every revealed set.")

    def handle_posterior(self, t, revealed, identity, out, **options):
        model = self._zero_one(options)
        if identity:
            self.emit(posterior_identity(model, t), out)
            return
        self.emit(GibbsTableSerializer(gibbs_table(posterior_model(model, t, parse_edges(revealed)))).data, out)

    def add_verify_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--t', type=float, required=True)
        parser.add_argument('--traces', type=int, default=100_000)
        parser.add_argument('--min-hits', type=int)

    def handle_verify(self, t, traces, min_hits, seed, out, **options):
        self.emit(verify_posterior_by_simulation(self._zero_one(options), t, traces, seed, min_hits), out)

    def add_certificate_arguments(self, parser):
        parser.add_argument('kind', choices=('variance', 'entropy', 'terminal', 'mlsi'))
        parser.add_argument('--C', type=float)
        parser.add_argument('--theta', type=float)
        parser.add_argument('--eta-op', type=float)
        parser.add_argument('--k-low', type=float)
        parser.add_argument('--n', type=int)
        parser.add_argument('--beta', type=float)
        parser.add_argument('--delta', type=int)
        parser.add_argument('--alpha-star', type=float)
        parser.add_argument('--M', type=float)

    def handle_certificate(self, kind, out, **o):
        need = {
            'variance': ('C', 'theta'),
            'entropy': ('eta_op', 'k_low', 'theta'),
            'terminal': ('n', 'beta', 'delta', 'alpha_star'),
            'mlsi': ('n', 'beta', 'delta', 'alpha_star', 'M'),
        }[kind]
        missing = [name for name in need if o.get(name) is None]
        if missing:
            raise InputError(f"{kind} certificate needs --{', --'.join(m.replace('_', '-') for m in missing)}.")
        if kind == 'variance':
            cert = variance_conservation_R(o['C'], o['theta'])
        elif kind == 'entropy':
            cert = entropy_conservation_R(o['eta_op'], o['k_low'], o['theta'])
        elif kind == 'terminal':
            cert = variance_conservation_at_terminal(o['n'], o['beta'], o['delta'], o['alpha_star'])
        else:
            cert = entropy_conservation_for_mlsi(o['n'], o['beta'], o['delta'], o['alpha_star'], o['M'])
        self.emit(cert, out)

    def _zero_one(self, options):
        model = self.load_model(options)
        return model if model.convention == ZERO_ONE else to_zero_one(model)
