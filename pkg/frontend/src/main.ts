import { CmsApi } from "./api";
import { CmsApp } from "./app";

window.addEventListener("load", () => {
    const root = document.getElementById("app");
    if (root === null) {
        throw new Error("missing #app mount point");
    }
    new CmsApp(root, new CmsApi());
});
