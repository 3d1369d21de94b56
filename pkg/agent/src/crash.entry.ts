// Crash-mode snippet entry: polluter and logger only.  No collector and
// no wrappers, so a bad termination cannot be an instrumentation
// artifact of the sink layer.

__ghInstallPolluter();
