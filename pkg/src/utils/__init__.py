# Config, scene and mesh I/O
