"""One training iteration of a pipelined transformer under each backend."""

from pccl_sim.bench import topology_for
from pccl_sim.cost_model import CostParams
from pccl_sim.taskgraph import coschedule, simulate, tag_comm_nodes, transformer_graph

p = CostParams()
for n in (32, 64, 128):
    g = coschedule(tag_comm_nodes(transformer_graph(n)))
    print(f"\n{n} ranks")
    for kind in ("ring", "torus2d", "torus3d", "grid2d", "grid3d"):
        t = topology_for(kind, n)
        cells = []
        for backend in ("ring", "rhd", "bucket", "pccl"):
            rep = simulate(g, backend, t, p)
            cells.append(f"{backend} {rep.throughput:6.1f}/s")
        print(f"  {kind:8s} " + "  ".join(cells))
