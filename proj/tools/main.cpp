#include "xnor_rram/cli.hpp"

int main(int argc, char** argv) { return xnor_rram::run_cli(argc, argv); }
