#include "general/cli.hpp"

int main(int argc, char** argv) { return general::cli_main(argc, argv); }
