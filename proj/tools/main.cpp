#include "preqn/cli.hpp"

int main(int argc, char** argv) { return preqn::cli_main(argc, argv); }
