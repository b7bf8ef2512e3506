"""Direct-exchange all-to-all on a 4x4x4 torus, fixed versus reconfigured."""

from pccl_sim.collectives import dex_schedule
from pccl_sim.cost_model import CostParams, round_cost, schedule_cost
from pccl_sim.planner import PlannerInput, plan
from pccl_sim.topology import make_topology

MB = 2**20
p = CostParams()
torus = make_topology("torus3d", [4, 4, 4])

s = dex_schedule(64, 32 * MB)
print("round  partner  dilation  congestion")
for i, (rd, w) in enumerate(zip(s.rounds, s.sizes)):
    rc = round_cost(torus, rd, w, p)
    print(f"{i:5d}  {rd[0][1]:7d}  {rc.dilation:8d}  {rc.congestion:10d}")

for nbytes in (MB, 8 * MB, 32 * MB, 256 * MB):
    s = dex_schedule(64, nbytes)
    base, _ = schedule_cost(torus, s, p)
    pl = plan(PlannerInput(torus, [], s, p))
    print(f"{nbytes // MB:4d} MB  fixed {base * 1e6:8.1f} us  planned {pl.total_time * 1e6:8.1f} us  "
          f"speedup {base / pl.total_time:.2f}x  reconfigs {pl.n_reconfigs}")
