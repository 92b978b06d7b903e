#include "dcpkit_cli.hpp"

int main(int argc, char** argv) { return dcpkit::cli::run_cli(argc, argv); }
