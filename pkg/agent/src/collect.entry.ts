// Collect-mode snippet entry: collector + logger, nothing else.

__ghInstallCollector();
