"""
Line constants of the 400 kV tower
==================================

Builds the series impedance and shunt capacitance matrices of the twin-bundle
tower, eliminates the ground wires and reports sequence quantities.
"""

# %%
# The bundled tower table is the default geometry.
import numpy as np

from faultzone.lineparam import (geometry_from_table, line_parameters, line_reactance,
                                 series_impedance_matrix)

tower = geometry_from_table()
print("phases at", [(c.x, round(c.y, 2)) for c in tower.conductors])

# %%
# Five wires (three bundles and two ground wires) before Kron reduction.
z5 = series_impedance_matrix(tower, 50.0)
np.set_printoptions(precision=4, suppress=True)
print(z5)

# %%
# Reduced phase matrices and sequence values per km.
lp = line_parameters(tower, 50.0)
print("z1 =", lp.z1, "ohm/km")
print("z0 =", lp.z0, "ohm/km")
print("C  =", np.diag(lp.c_shunt) * 1e9, "nF/km (self)")

# %%
# Total reactance of the 250 km line used to size the series capacitor.
print("X(250 km, 60 Hz) = %.2f ohm" % line_reactance(tower, 250.0, 60.0))
