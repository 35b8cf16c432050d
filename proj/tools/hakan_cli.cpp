#include "hakan/cli.hpp"

int main(int argc, char** argv) { return hakan::cli::run_main(argc, argv); }
