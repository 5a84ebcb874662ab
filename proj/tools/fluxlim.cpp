#include "fluxlim/cli.hpp"

int main(int argc, char** argv) { return fluxlim::cli_main(argc, argv); }
