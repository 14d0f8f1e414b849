import { ApiClient } from "./api";
import { bootConsole } from "./app";

bootConsole(document, new ApiClient(""));
