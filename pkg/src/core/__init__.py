# Simplicial, Grassmann, stack and regularity core
