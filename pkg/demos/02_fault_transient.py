"""
A single fault transient
========================

Simulates a phase-A to ground fault behind a 50 % series capacitor and compares
the pre-fault relay current with the phasor solution of the same network.
"""

# %%
import numpy as np

from faultzone.emtsim import (FaultSpec, NetworkConfig, SimParams, TcscSpec, build_network,
                              fundamental_phasor, phasor_solve, run_case)
from faultzone.lineparam import geometry_from_table, line_parameters, line_reactance

tower = geometry_from_table()
net = NetworkConfig(line=line_parameters(tower),
                    tcsc=TcscSpec(125.0, 50, line_reactance(tower, 250.0, 60.0)))
engine = build_network(net)
sim = SimParams()

# %%
# Fault 150 km from the relay, 5 ohm, at 45 degrees on the phase-A voltage.
rec = run_case(engine, FaultSpec("AG", 150.0, 5.0, 45.0), sim)
print("samples per phase:", len(rec.ia), "at", rec.rate, "Hz; fault at index", rec.inception_index)

# %%
# The last pre-fault cycle agrees with the steady-state phasor solve.
stop = rec.inception_index
got = np.array([fundamental_phasor(x[:stop], rec.rate, sim=sim) for x in rec.currents])
got *= np.exp(-2j * np.pi * 50.0 * rec.t0)
ref = phasor_solve(net)
print("|I| EMT   :", np.abs(got).round(1))
print("|I| phasor:", np.abs(ref).round(1))

# %%
# Peak phase-A current after the fault.
print("peak after fault: %.0f A" % np.abs(rec.ia[stop:]).max())
