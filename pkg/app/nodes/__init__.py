# Nodes module
