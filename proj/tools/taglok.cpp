#include "taglok/cli.hpp"

int main(int argc, char** argv) { return taglok::cli::run_cli(argc, argv); }
