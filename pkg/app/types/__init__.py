# Types module
