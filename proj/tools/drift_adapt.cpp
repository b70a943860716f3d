#include "driftadapt/cli.hpp"

int main(int argc, char** argv) { return driftadapt::cli_main(argc, argv); }
