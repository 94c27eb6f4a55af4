#include "fpot/cli.hpp"

int main(int argc, char** argv) { return fpot::run_cli(argc, argv); }
