# Graph module
