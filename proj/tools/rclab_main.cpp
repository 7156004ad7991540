#include "rclab/cli.hpp"

int main(int argc, char** argv) { return rclab::run_cli(argc, argv); }
