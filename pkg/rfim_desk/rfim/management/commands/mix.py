import numpy as np

from rfim.files import write_model, write_trajectory
from rfim.glauber import detailed_balance_check, empirical_tv_curve, monotone_coupled_run, run_chain
from rfim.models import spin_values

from ._base import RfimCommand, parse_ints


def extreme_state(model, which):
    bottom, top = spin_values(model.convention)
    state = np.full(model.n, top if which == 'top' else bottom, dtype=np.int8)
    for v, s in model.pinning.items():
        state[v] = s
    return state


class Command(RfimCommand):
    help = "Glauber dynamics: run, couple, tvcurve, balance."
    actions = ('run', 'couple', 'tvcurve', 'balance')

    def add_run_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--steps', type=int, required=True)
        parser.add_argument('--init', choices=('bottom', 'top'), default='bottom')
        parser.add_argument('--record-every', type=int)
        parser.add_argument('--trajectory', help="CSV path for (step, magnetization, energy).")

    def handle_run(self, steps, init, record_every, trajectory, seed, out, **options):
        model = self.load_model(options)
        record = record_every or (max(steps // 100, 1) if trajectory else None)
        state, series = run_chain(model, extreme_state(model, init), steps, seed, record)
        if trajectory:
            write_trajectory(series, trajectory)
        if out:
            write_model(model, out, configuration=state.config)
            self.stdout.write(self.style.SUCCESS(f"Wrote {out}"))
        else:
            self.emit({"steps": state.step, "configuration": state.config})

    def add_couple_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--steps', type=int, required=True)
        parser.add_argument('--log-uniforms', action='store_true')

    def handle_couple(self, steps, log_uniforms, seed, out, **options):
        model = self.load_model(options)
        trace = monotone_coupled_run(model, extreme_state(model, 'bottom'), extreme_state(model, 'top'), steps, seed,
                                     log_uniforms)
        self.emit({
            "coalescence_step": trace.coalescence_step,
            "disagreement_set": trace.disagreement_set,
            "low": trace.states[0].config,
            "high": trace.states[1].config,
            "uniforms": trace.shared_uniform_log,
        }, out)

    def add_tvcurve_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--steps', required=True, help="Comma-separated step grid.")
        parser.add_argument('--replicas', type=int, default=10_000)
        parser.add_argument('--init', choices=('bottom', 'top'), default='bottom')

    def handle_tvcurve(self, steps, replicas, init, seed, out, **options):
        model = self.load_model(options)
        self.emit(empirical_tv_curve(model, extreme_state(model, init), parse_ints(steps), replicas, seed), out)

    def add_balance_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--transitions', type=int, default=100_000)

    def handle_balance(self, transitions, seed, out, **options):
        self.emit(detailed_balance_check(self.load_model(options), transitions, seed), out)
