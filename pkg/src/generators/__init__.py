# Triangulation generators
