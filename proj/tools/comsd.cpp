#include "comsd/cli.hpp"

int main(int argc, char** argv) { return comsd::RunCli(argc, argv); }
