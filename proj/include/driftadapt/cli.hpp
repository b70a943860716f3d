#pragma once

namespace driftadapt {

// Entry point behind the drift-adapt binary. Exit codes: 0 success, 1
// stage failure, 2 invalid config or missing input.
int cli_main(int argc, const char* const* argv);

}  // namespace driftadapt
