#include "aqc/cli.hpp"

int main(int argc, char** argv) { return aqc::run_cli(argc, argv); }
