from rfim.experiments import run_experiment
from rfim.files import read_json

from ._base import RfimCommand


class Command(RfimCommand):
    help = "Run an experiment pipeline from a JSON config."
    actions = ('run',)

    def add_run_arguments(self, parser):
        parser.add_argument('--config', required=True)

    def handle_run(self, config, out, **options):
        data = read_json(config)
        if 'seed' not in data:
            data['seed'] = options['seed']
        bundle = run_experiment(data, out)
        if out:
            self.stdout.write(self.style.SUCCESS(f"Wrote {len(bundle.results)} step report(s) to {out}"))
        else:
            self.emit({"manifest": bundle.manifest,
                       "results": {name: result.summary for name, result in bundle.results.items()}})
