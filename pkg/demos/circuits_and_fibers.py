"""Routing optical circuits: waveguides inside a chip, fibers between servers."""

import time

from pccl_sim.fiber_planner import ServerGraph, plan_fibers, random_requests, verify_plan
from pccl_sim.mesh_router import MeshGraph, random_requests as mesh_requests, route_all, validate_routes

print("MZI mesh, one wavelength, max one circuit per waveguide")
for side, count in ((32, 32), (64, 64), (64, 128), (256, 128)):
    g = MeshGraph(side, side)
    reqs = mesh_requests(side, side, count, seed=0)
    t0 = time.perf_counter()
    routes, _ = route_all(g, reqs)
    dt = time.perf_counter() - t0
    ok = validate_routes(MeshGraph(side, side), routes)
    routed = sum(r.valid for r in routes)
    print(f"  {side}x{side}, {count:3d} requests: routed {routed:3d}  valid={ok}  {dt:.2f}s")

print("\nFibers per link on an 8x8 server grid")
g = ServerGraph.grid(8, 8)
for count in (100, 512):
    reqs = random_requests(64, count, seed=0)
    p = plan_fibers(g, reqs, seed=0)
    print(f"  {count:3d} circuits: z={p.z} (lower bound {p.meta['lower_bound']})  "
          f"method={p.meta['method']}  valid={verify_plan(g, reqs, p)}")
