"""How reconfiguration delay shapes a 128-rank RHD reduce-scatter.

Starting from a ring, the planner picks a topology for each round.  Cheap
reconfiguration buys a dedicated topology every round; expensive
reconfiguration makes it hold on to a topology and eat some congestion.
"""

from pccl_sim.collectives import rhd_schedule
from pccl_sim.cost_model import CostParams, schedule_cost
from pccl_sim.planner import PlannerInput, plan
from pccl_sim.topology import make_topology

MB = 2**20

ring = make_topology("ring", [128])
for nbytes in (256 * MB, 1024 * MB):
    s = rhd_schedule(128, "reduce_scatter", nbytes)
    fixed, _ = schedule_cost(ring, s, CostParams())
    print(f"\n{nbytes // MB} MB buffer, RHD on a fixed ring: {fixed * 1e6:.1f} us")
    for r_us in (5, 10, 25, 50, 500, 1000):
        pl = plan(PlannerInput(ring, [], s, CostParams().with_reconf(r_us * 1e-6)))
        print(f"  r={r_us:5d} us  total {pl.total_time * 1e6:9.1f} us  "
              f"reconfigs {pl.n_reconfigs}  at rounds {pl.reconfig_rounds}")
