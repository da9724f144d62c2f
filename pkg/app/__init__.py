# UAV wake-up collector
