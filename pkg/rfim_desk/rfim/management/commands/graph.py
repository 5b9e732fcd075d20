from rfim.files import read_graph, write_graph
from rfim.graphs import (GENERATORS, connected_components, connected_ordering, eccentricity, growth_profile,
                         is_prefix_connected)
from rfim.serializers import GraphSerializer, load

from ._base import RfimCommand


class Command(RfimCommand):
    help = "Generate graphs and inspect their geometry: gen, info, order, growth."
    actions = ('gen', 'info', 'order', 'growth')

    def add_gen_arguments(self, parser):
        parser.add_argument('kind', choices=sorted(GENERATORS))
        for name in ('n', 'rows', 'cols', 'degree', 'depth'):
            parser.add_argument(f'--{name}', type=int)

    def handle_gen(self, kind, seed, out, **options):
        params = {k: options[k] for k in ('n', 'rows', 'cols', 'degree', 'depth') if options.get(k) is not None}
        params['seed'] = seed
        graph = load(GraphSerializer, {"generator": kind, "params": params}, f"{kind} generator")
        if out:
            path = write_graph(graph, out)
            self.stdout.write(self.style.SUCCESS(f"Wrote {path}"))
        else:
            self.emit(GraphSerializer(graph).data)

    def add_info_arguments(self, parser):
        parser.add_argument('--graph', required=True)

    def handle_info(self, graph, out, **options):
        g = read_graph(graph)
        components = connected_components(g)
        self.emit({
            "n": g.num_vertices,
            "m": len(g.edges),
            "max_degree": g.max_degree(),
            "degrees": list(g.degrees()),
            "components": len(components),
            "eccentricity": [eccentricity(g, v) for v in range(g.num_vertices)] if len(components) == 1 else None,
        }, out)

    def add_order_arguments(self, parser):
        parser.add_argument('--graph', required=True)
        parser.add_argument('--start', type=int)

    def handle_order(self, graph, seed, start, out, **options):
        g = read_graph(graph)
        order = connected_ordering(g, seed, start)
        self.emit({"order": list(order), "prefix_connected": is_prefix_connected(g, order)}, out)

    def add_growth_arguments(self, parser):
        parser.add_argument('--graph', required=True)
        parser.add_argument('--alpha', type=float, required=True)
        parser.add_argument('--c-alpha', type=float, required=True)

    def handle_growth(self, graph, alpha, c_alpha, out, **options):
        self.emit(growth_profile(read_graph(graph), alpha, c_alpha), out)
