"""Tour of the model layer: parameters, forcing variants, vector field,
Jacobian and the a-priori trajectory ceilings.

The state is u = (x, y, z): uninfected cells, infected cells, free
virions. Production of uninfected cells is a forcing object so the
constant (autonomous) and time-varying cases share one vector field.
"""

import math

import numpy as np

import hbvkit as hk

params = hk.Parameters(mu1=2.0, mu2=3.0, mu3=7.0, beta=0.2, eta=0.2, epsilon=0.5, p=0.01, q=5.0)
print("rates:", params)

# three ways to drive production
constant = hk.ConstantForcing(9.8135)
wave = hk.SinusoidForcing(amplitude=1.0, omega=2.0, phase=math.pi / 3.0, offset=10.0)
table = hk.PiecewiseLinearForcing(times=(0.0, 2.0, 5.0), values=(9.0, 11.0, 10.0))

for forcing in (constant, wave, table):
    print(f"{type(forcing).__name__:24s} L(1.0) = {forcing(1.0):8.4f}  bounds = {forcing.bounds}")

# the vector field vanishes at the infection-free point (L/mu1, 0, 0)
dfe = (constant.value / params.mu1, 0.0, 0.0)
print("\nvector field at the infection-free point:", hk.vector_field(params, constant, 0.0, dfe))
print("vector field at (1, 1, 1):", hk.vector_field(params, constant, 0.0, (1.0, 1.0, 1.0)))

# the Jacobian drives every local stability statement later on
J = hk.jacobian(params, dfe)
print("\nJacobian at the infection-free point:")
print(np.array_str(J, precision=6))

# adding the two cell equations eliminates infection and cure terms, which
# yields hard ceilings on any trajectory before integrating anything
bounds = hk.analytic_bounds(params, wave, (1.0, 1.0, 1.0))
print("\nceilings from u0 = (1,1,1) under the wave forcing:")
print(f"  x+y <= {bounds.M}")
print(f"  z   <= {bounds.z_ceiling}")
print(f"  l1 decay rate alpha = {bounds.l1_alpha}, absorbing radius = {bounds.l1_ceiling}")
