#include "rvt/cli.hpp"

int main(int argc, char** argv) { return rvt::run_cli(argc, argv); }
